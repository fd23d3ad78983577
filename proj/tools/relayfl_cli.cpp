// relayfl: run federated-learning experiments and single-relay certification sweeps.
//
//   relayfl run --config cfg.json --out results.csv [--seed N]
//   relayfl theorem-sweep --config cfg.json --out cert.csv [--seed N]
//
// Exit status: 0 success, 1 configuration error, 2 I/O error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "relayfl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

void print_summary(const relayfl::ResultTable& table) {
  // Final round of every sweep point only; the CSV has the full curves.
  const auto points = relayfl::summarize(table);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const bool last = i + 1 == points.size() || points[i + 1].sweep_key != p.sweep_key ||
                      points[i + 1].sweep_value != p.sweep_value;
    if (!last) continue;
    std::printf("%s=%s round=%d trials=%d nmse_db=%.4f (se %.4f) accuracy=%.4f (se %.4f)\n", p.sweep_key.c_str(),
                relayfl::format_double(p.sweep_value).c_str(), p.round, p.count, p.nmse_db_mean, p.nmse_db_stderr,
                p.accuracy_mean, p.accuracy_stderr);
  }
}

void print_certificate(const relayfl::ResultTable& table) {
  int eligible = 0, certified = 0, solver_worse = 0;
  for (std::size_t i = 0; i + 1 < table.size(); i += 2) {
    const auto& construction = table[i];
    const auto& solved = table[i + 1];
    if (*construction.cond40 && *construction.cond41) {
      ++eligible;
      certified += *construction.mse_predicted <= *construction.mse_norelay_bound;
    }
    solver_worse += *solved.mse_predicted > *construction.mse_predicted;
  }
  std::printf("instances=%zu condition_satisfying=%d certified=%d solver_increased=%d\n", table.size() / 2, eligible,
              certified, solver_worse);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relay-assisted over-the-air federated learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment configuration")->required();
    cmd->add_option("--out", out_path, "CSV output path")->required();
    cmd->add_option("--seed", seed, "override master_seed");
  };
  auto* run = app.add_subcommand("run", "FedAvg Monte Carlo run over trials and sweep points");
  add_common(run);
  auto* sweep = app.add_subcommand("theorem-sweep", "single-relay dominance certification over random instances");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  relayfl::ExperimentConfig cfg;
  try {
    cfg = relayfl::load_config(config_path);
    if (seed) cfg.master_seed = *seed;
  } catch (const relayfl::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const relayfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  relayfl::ResultTable table;
  try {
    table = run->parsed() ? relayfl::run_experiment(cfg) : relayfl::theorem_sweep(cfg);
  } catch (const relayfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const relayfl::DomainError& e) {
    // Raised by inputs that pass schema checks but cannot be realised, e.g. more devices than samples.
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    relayfl::write_csv(table, out_path);
  } catch (const relayfl::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }

  if (run->parsed())
    print_summary(table);
  else
    print_certificate(table);
  return kExitOk;
}
