// Command-line front end: `run` executes an experiment, `compare` diffs two
// run directories, `oracle` produces a reference run with the same artifact
// layout.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>

#include "splitfilter/experiment.hpp"
#include "splitfilter/svg_plots.hpp"

namespace {

splitfilter::ExperimentConfig load_config(const std::string& preset,
                                          const std::string& config_path) {
  using namespace splitfilter;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config file " + config_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
  }
  if (!preset.empty()) return preset_config(preset);
  throw ConfigError("provide --preset or --config");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace splitfilter;
  CLI::App app{"Sequential splitting-up filter with neural-network priors"};
  app.require_subcommand(1);

  // run
  std::string preset, config_path, out_dir, oracle_flag;
  std::uint64_t seed = 0;
  bool seed_set = false, plots = false;
  int steps_override = 0, epochs_override = 0, workers_override = -1;

  auto* run = app.add_subcommand("run", "run one filtering experiment");
  run->add_option("--preset", preset, "linear-case1 | linear-case2 | benes");
  run->add_option("--config", config_path, "config file (flat key = value)");
  run->add_option("--seed", seed, "root seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--oracle", oracle_flag, "none | kalman | grid | fk")
      ->check(CLI::IsMember({"none", "kalman", "grid", "fk"}));
  run->add_option("--steps", steps_override, "override the number of observation steps");
  run->add_option("--epochs", epochs_override, "override the training epochs per step");
  run->add_option("--workers", workers_override, "worker threads for path sampling");
  run->add_flag("--plots", plots, "emit SVG figures into <out>/plots");

  // compare
  std::string dir_a, dir_b, criteria_path, report_path;
  auto* compare = app.add_subcommand("compare", "compare two run directories");
  compare->add_option("dir_a", dir_a)->required();
  compare->add_option("dir_b", dir_b)->required();
  compare->add_option("--criteria", criteria_path, "threshold file (max_l2, max_abs_mean_diff)");
  compare->add_option("--out", report_path, "write per-step comparison csv");

  // oracle
  std::string oracle_kind, obs_dir;
  auto* oracle = app.add_subcommand("oracle", "run a reference solver only");
  oracle->add_option("--preset", preset, "linear-case1 | linear-case2 | benes");
  oracle->add_option("--config", config_path, "config file");
  oracle->add_option("--oracle", oracle_kind, "kalman | grid | fk")
      ->required()
      ->check(CLI::IsMember({"kalman", "grid", "fk"}));
  oracle->add_option("--obs", obs_dir, "run directory providing observations.csv");
  oracle->add_option("--seed", seed, "root seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  oracle->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = load_config(preset, config_path);
      if (seed_set) cfg.seed = seed;
      if (!out_dir.empty()) cfg.out = out_dir;
      if (!oracle_flag.empty()) cfg.oracle = oracle_flag;
      if (steps_override > 0) cfg.n_steps = steps_override;
      if (epochs_override > 0) cfg.epochs = epochs_override;
      if (workers_override >= 0) cfg.workers = workers_override;
      const auto outcome = run_experiment(cfg);
      if (outcome.exit_code == 0) {
        std::printf("run complete: %zu steps -> %s\n", outcome.result.steps.size(),
                    outcome.out_dir.c_str());
      } else {
        std::fprintf(stderr, "run aborted at step %d: %s (partial artifacts in %s)\n",
                     outcome.result.abort_step, outcome.result.abort_reason.c_str(),
                     outcome.out_dir.c_str());
      }
      if (plots && !outcome.result.steps.empty()) {
        plots::emit_run_plots(outcome.out_dir);
        std::printf("figures in %s/plots\n", outcome.out_dir.c_str());
      }
      return outcome.exit_code;
    }

    if (compare->parsed()) {
      const auto report = compare_runs(dir_a, dir_b, criteria_path, report_path);
      std::printf("compared %d steps: max L2 = %.6g, max |mean diff| = %.6g\n",
                  report.steps, report.max_l2, report.max_abs_mean_diff);
      if (!report.thresholds_ok) {
        std::fprintf(stderr, "criteria violated (%s)\n", criteria_path.c_str());
        return 1;
      }
      return 0;
    }

    if (oracle->parsed()) {
      ExperimentConfig cfg = load_config(preset, config_path);
      if (seed_set) cfg.seed = seed;
      if (!out_dir.empty()) cfg.out = out_dir;
      cfg.oracle = oracle_kind;
      const auto outcome = oracle_experiment(cfg, cfg.oracle_kind(), obs_dir);
      std::printf("oracle run -> %s\n", outcome.out_dir.c_str());
      return outcome.exit_code;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 64;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
