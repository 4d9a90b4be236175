#include "sdpf/metrics.hpp"

#include <algorithm>

namespace sdpf {

namespace {

void check_nonneg(std::int64_t n, const char* what) {
  if (n < 0) throw LedgerError(std::string("negative ") + what + " delta");
}

}  // namespace

void MetricsLedger::add_source_bytes(std::int64_t n) {
  check_nonneg(n, "q_source");
  q_source_ += n;
}

void MetricsLedger::add_net_bytes(std::int64_t n) {
  check_nonneg(n, "q_net");
  q_net_ += n;
}

void MetricsLedger::add_input_bytes(std::int64_t n) {
  check_nonneg(n, "input");
  input_ += n;
}

void MetricsLedger::add_output_bytes(std::int64_t n) {
  check_nonneg(n, "output");
  output_ += n;
}

void MetricsLedger::record_buffer(NodeId node, std::int64_t bytes) {
  check_nonneg(bytes, "buffer");
  auto [it, inserted] = peaks_.emplace(node, bytes);
  if (!inserted) it->second = std::max(it->second, bytes);
}

void MetricsLedger::record_completion(SimTime t) { completions_.push_back(t); }

double amplification(const MetricsLedger& ledger) {
  if (ledger.io_total() <= 0) {
    throw LedgerError("amplification undefined: |I| + |O| is zero");
  }
  return static_cast<double>(ledger.q_source_bytes()) /
         static_cast<double>(ledger.io_total());
}

double prop51_bound(std::span<const std::int64_t> tile_sizes,
                    std::span<const std::int64_t> consumption_counts,
                    std::int64_t io_total) {
  if (tile_sizes.size() != consumption_counts.size()) {
    throw LedgerError("tile size / consumption count lists differ in length");
  }
  if (io_total <= 0) throw LedgerError("io_total must be positive");
  std::int64_t redundant = 0;
  for (std::size_t k = 0; k < tile_sizes.size(); ++k) {
    if (consumption_counts[k] < 1) {
      throw LedgerError("consumption count U_k must be at least 1");
    }
    redundant += (consumption_counts[k] - 1) * tile_sizes[k];
  }
  return 1.0 + static_cast<double>(redundant) / static_cast<double>(io_total);
}

std::int64_t peak_memory(const MetricsLedger& ledger) {
  if (ledger.node_peaks().empty()) {
    throw LedgerError("peak_memory on a ledger with no buffer samples");
  }
  std::int64_t peak = 0;
  for (const auto& [node, bytes] : ledger.node_peaks()) {
    peak = std::max(peak, bytes);
  }
  return peak;
}

nlohmann::json ledger_summary(const MetricsLedger& ledger) {
  nlohmann::json per_node = nlohmann::json::array();
  for (const auto& [node, bytes] : ledger.node_peaks()) {
    per_node.push_back({{"node", node}, {"peak_bytes", bytes}});
  }
  nlohmann::json out = {
      {"q_source", ledger.q_source_bytes()},
      {"q_net", ledger.q_net_bytes()},
      {"io_total", ledger.io_total()},
      {"w_max", ledger.node_peaks().empty() ? 0 : peak_memory(ledger)},
      {"per_node_peaks", per_node},
  };
  if (ledger.io_total() > 0) out["r_a"] = amplification(ledger);
  return out;
}

}  // namespace sdpf
