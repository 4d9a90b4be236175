#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sdpf/experiments.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> p_sweep;
  sdpf::ExperimentConfig overrides;
  bool has_seed = false, has_seeds = false, has_alpha = false;
  bool has_p_loss = false, has_p_dup = false, has_p_f = false;
  bool has_window = false, has_expr = false;
};

void add_common_options(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--config", cli.config_path, "JSON config file");
  cmd->add_option("--seed", cli.overrides.seed, "base seed")
      ->trigger_on_parse()
      ->each([&cli](const std::string&) { cli.has_seed = true; });
  cmd->add_option("--seeds", cli.overrides.seeds, "number of seeded runs")
      ->each([&cli](const std::string&) { cli.has_seeds = true; });
  cmd->add_option("--P-sweep", cli.p_sweep,
                  "comma-separated node counts, e.g. 2,4,8")
      ->delimiter(',');
  cmd->add_option("--alpha", cli.overrides.alpha, "Pareto tail exponent")
      ->each([&cli](const std::string&) { cli.has_alpha = true; });
  cmd->add_option("--p-loss", cli.overrides.p_loss, "loss probability")
      ->each([&cli](const std::string&) { cli.has_p_loss = true; });
  cmd->add_option("--p-dup", cli.overrides.p_dup, "duplication probability")
      ->each([&cli](const std::string&) { cli.has_p_dup = true; });
  cmd->add_option("--p-f", cli.overrides.p_f, "per-epoch crash probability")
      ->each([&cli](const std::string&) { cli.has_p_f = true; });
  cmd->add_option("--window", cli.overrides.window, "window capacity W_p")
      ->each([&cli](const std::string&) { cli.has_window = true; });
  cmd->add_option("--expr", cli.overrides.expr, "SK expression (skrun)")
      ->each([&cli](const std::string&) { cli.has_expr = true; });
  cmd->add_option("--out", cli.overrides.out, "output path (default stdout)");
  cmd->add_option("--format", cli.overrides.format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

sdpf::ExperimentConfig resolve(const Cli& cli) {
  sdpf::ExperimentConfig cfg;
  if (!cli.config_path.empty()) {
    std::ifstream in(cli.config_path);
    if (!in) throw CLI::ValidationError("config file not readable: " + cli.config_path);
    nlohmann::json j;
    in >> j;
    cfg = sdpf::config_from_json(j, cfg);
  }
  // Flags override the config file.
  if (cli.has_seed) cfg.seed = cli.overrides.seed;
  if (cli.has_seeds) cfg.seeds = cli.overrides.seeds;
  if (!cli.p_sweep.empty()) {
    cfg.p_sweep.clear();
    for (const auto& s : cli.p_sweep) cfg.p_sweep.push_back(std::stoul(s));
  }
  if (cli.has_alpha) cfg.alpha = cli.overrides.alpha;
  if (cli.has_p_loss) cfg.p_loss = cli.overrides.p_loss;
  if (cli.has_p_dup) cfg.p_dup = cli.overrides.p_dup;
  if (cli.has_p_f) cfg.p_f = cli.overrides.p_f;
  if (cli.has_window) cfg.window = cli.overrides.window;
  if (cli.has_expr) cfg.expr = cli.overrides.expr;
  if (!cli.overrides.out.empty()) cfg.out = cli.overrides.out;
  if (!cli.overrides.format.empty()) cfg.format = cli.overrides.format;
  return cfg;
}

int emit(const sdpf::ExperimentReport& report, const sdpf::ExperimentConfig& cfg) {
  std::string text = cfg.format == "csv" ? report.to_csv() : report.to_jsonl();
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write " << cfg.out << "\n";
      return 2;
    }
    out << text;
  }
  std::cerr << report.experiment << ": " << (report.pass ? "PASS" : "FAIL")
            << "\n";
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdpf: deterministic simulator and experiment harness for "
               "self-describing parallel flows"};
  app.require_subcommand(1);

  const std::vector<std::string> names = {"converge", "scale",  "ioamp",
                                          "memory",   "skrun", "ablate"};
  const std::vector<std::string> descriptions = {
      "strong eventual consistency under chaos vs the join_all oracle",
      "BSP vs barrier-less throughput scaling exponents",
      "I/O amplification: multi-fetch vs single-read-multicast",
      "peak memory: hoarding vs sliding-window pair streams",
      "distributed SK reduction vs the sequential oracle",
      "metadata minimality ablations (rid, id, field presence)",
  };
  std::vector<Cli> clis(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto* cmd = app.add_subcommand(names[i], descriptions[i]);
    add_common_options(cmd, clis[i]);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < names.size(); ++i) {
    if (app.got_subcommand(names[i])) {
      try {
        auto cfg = resolve(clis[i]);
        auto report = sdpf::run_experiment(names[i], cfg);
        return emit(report, cfg);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }
  return 2;
}
