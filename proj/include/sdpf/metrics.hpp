#ifndef SDPF_METRICS_HPP_
#define SDPF_METRICS_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sdpf/errors.hpp"
#include "sdpf/ids.hpp"

#include "json.hpp"

namespace sdpf {

/// Byte counters split by boundary. q_source counts raw payload bytes
/// crossing the slow-storage boundary (input reads, output writes, redundant
/// fetches); q_net counts node-to-node wire bytes including the 40-byte
/// metadata header, retransmissions, and 16 bytes per ack or nack. The
/// amplification factor is computed over the source boundary, so single-read
/// runs land on exactly 1.0 while in-network replication stays visible in
/// q_net.
class MetricsLedger {
 public:
  void add_source_bytes(std::int64_t n);
  void add_net_bytes(std::int64_t n);
  void add_input_bytes(std::int64_t n);
  void add_output_bytes(std::int64_t n);

  /// Records a buffer occupancy sample; keeps the per-node high-water mark.
  void record_buffer(NodeId node, std::int64_t bytes);
  void record_completion(SimTime t);

  std::int64_t q_source_bytes() const { return q_source_; }
  std::int64_t q_net_bytes() const { return q_net_; }
  std::int64_t input_bytes() const { return input_; }
  std::int64_t output_bytes() const { return output_; }
  std::int64_t io_total() const { return input_ + output_; }

  const std::map<NodeId, std::int64_t>& node_peaks() const { return peaks_; }
  const std::vector<SimTime>& completions() const { return completions_; }

 private:
  std::int64_t q_source_ = 0;
  std::int64_t q_net_ = 0;
  std::int64_t input_ = 0;
  std::int64_t output_ = 0;
  std::map<NodeId, std::int64_t> peaks_;
  std::vector<SimTime> completions_;
};

/// R_A over the slow-storage boundary: q_source / (|I| + |O|).
double amplification(const MetricsLedger& ledger);

/// Analytic lower bound on R_A when consumers independently fetch shared
/// tiles from the source: 1 + sum_k (U_k - 1) * |tile_k| / io_total.
double prop51_bound(std::span<const std::int64_t> tile_sizes,
                    std::span<const std::int64_t> consumption_counts,
                    std::int64_t io_total);

/// W_max: the maximum buffered bytes over all nodes and times.
std::int64_t peak_memory(const MetricsLedger& ledger);

nlohmann::json ledger_summary(const MetricsLedger& ledger);

}  // namespace sdpf

#endif  // SDPF_METRICS_HPP_
