#ifndef SDPF_EXPERIMENTS_HPP_
#define SDPF_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sdpf/driver.hpp"

#include "json.hpp"

namespace sdpf {

/// Resolved parameters for one experiment invocation. Every run's report
/// embeds this config plus its seed, so reports are reproducible from the
/// report alone.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int seeds = 100;
  std::vector<std::size_t> p_sweep = {2, 4, 8, 16, 32, 64, 128, 256};
  double alpha = 2.0;
  double alpha_second = 1.5;  // second tail exponent checked by scale
  double p_loss = 0.1;
  double p_dup = 0.2;
  double p_f = 0.01;
  std::size_t window = 8;

  int count = 50;            // converge: increments per run
  int rounds = 200;          // scale: BSP rounds
  int tasks_per_node = 2000; // scale: async tasks per node
  int scale_seeds = 3;       // scale: seeds averaged per sweep point

  std::vector<int> n_sweep = {100, 1000, 10000};  // memory: pair counts
  std::vector<int> ioamp_n = {4, 8, 16, 32, 64};  // ioamp: tile counts
  int ioamp_u = 3;

  std::string expr;   // skrun: single expression (corpus when empty)
  int corpus = 30;
  int sk_seeds = 10;
  std::size_t sk_nodes = 4;

  std::string out;             // output path; empty = stdout
  std::string format = "json"; // json | csv
};

ExperimentConfig config_from_json(const nlohmann::json& j,
                                  ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ExperimentReport {
  std::string experiment;
  bool pass = false;
  nlohmann::json config;
  std::vector<nlohmann::json> runs;  // one object per run
  nlohmann::json summary;            // fits, aggregate pass flags

  /// JSON-lines: one line per run (config echoed), then a summary line.
  std::string to_jsonl() const;
  /// CSV summary: experiment,P,seed,alpha,throughput,w_max,r_a,exponent,
  /// exponent_stderr,pass
  std::string to_csv() const;
};

ExperimentReport cmd_converge(const ExperimentConfig& cfg);
ExperimentReport cmd_scale(const ExperimentConfig& cfg);
ExperimentReport cmd_ioamp(const ExperimentConfig& cfg);
ExperimentReport cmd_memory(const ExperimentConfig& cfg);
ExperimentReport cmd_skrun(const ExperimentConfig& cfg);
ExperimentReport cmd_ablate(const ExperimentConfig& cfg);

ExperimentReport run_experiment(const std::string& name,
                                const ExperimentConfig& cfg);

}  // namespace sdpf

#endif  // SDPF_EXPERIMENTS_HPP_
