#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "splitfilter/config.hpp"
#include "splitfilter/csv.hpp"
#include "splitfilter/filter.hpp"
#include "splitfilter/reference.hpp"

namespace splitfilter {

namespace expdetail {

inline std::string step_file(const std::string& dir, const char* stem, int n,
                             const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", stem, n, ext);
  return dir + "/" + buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  f << text;
}

inline void write_training_csv(const std::string& path, const TrainingReport& report) {
  csvdetail::File f(path, "w");
  f.line("epoch,loss,lr,l2_ref");
  std::size_t ck = 0;
  for (std::size_t e = 0; e < report.losses.size(); ++e) {
    std::string row = std::to_string(e + 1) + "," + csvdetail::fmt(report.losses[e]) +
                      "," + csvdetail::fmt(report.learning_rates[e]);
    if (ck < report.l2_checkpoints.size() &&
        report.l2_checkpoints[ck].first == static_cast<int>(e + 1)) {
      row += "," + csvdetail::fmt(report.l2_checkpoints[ck].second);
      ++ck;
    } else {
      row += ",";
    }
    f.line(row);
  }
}

}  // namespace expdetail

// Per-step oracle series shaped like the neural artifacts so `compare` works
// across run directories.
struct OracleSeries {
  std::vector<double> grid;
  std::vector<std::vector<double>> priors;      // pre-correction density per step
  std::vector<std::vector<double>> posteriors;  // post-correction density per step
  std::vector<StepDiagnostics> diagnostics;
};

// Kalman-Bucy series evaluated as Gaussian densities on the grid.
inline OracleSeries kalman_oracle_series(const ExperimentConfig& cfg,
                                         const ObservationPath& obs) {
  OracleSeries out;
  const Domain domain = cfg.domain();
  out.grid = uniform_grid(domain, cfg.eval_grid_points);
  const auto params = cfg.linear_params();
  KalmanState state{Eigen::VectorXd::Constant(1, cfg.init_mean),
                    Eigen::MatrixXd::Constant(1, 1, cfg.init_std * cfg.init_std)};
  for (int n = 1; n <= cfg.n_steps; ++n) {
    const double dt = obs.times[static_cast<std::size_t>(n)] -
                      obs.times[static_cast<std::size_t>(n - 1)];
    // prediction moments before the innovation update
    KalmanState pred = state;
    const double tau = dt / cfg.substeps;
    for (int j = 0; j < cfg.substeps; ++j) {
      pred.mean(0) += tau * (cfg.lin_M * pred.mean(0) + cfg.lin_eta);
      pred.cov(0, 0) += tau * (2.0 * cfg.lin_M * pred.cov(0, 0) + cfg.lin_Sigma * cfg.lin_Sigma);
    }
    std::vector<double> dy = {obs.values[static_cast<std::size_t>(n)] -
                              obs.values[static_cast<std::size_t>(n - 1)]};
    state = kalman_bucy_step(state, params, dy, dt, cfg.substeps);

    std::vector<double> prior(out.grid.size()), post(out.grid.size());
    for (std::size_t i = 0; i < out.grid.size(); ++i) {
      prior[i] = normal_pdf(out.grid[i], pred.mean(0), std::sqrt(pred.cov(0, 0)));
      post[i] = normal_pdf(out.grid[i], state.mean(0), std::sqrt(state.cov(0, 0)));
    }
    StepDiagnostics d;
    d.step = n;
    d.time = obs.times[static_cast<std::size_t>(n)];
    d.z_n = dy[0] / dt;
    const auto m = density_moments(post, out.grid[1] - out.grid[0], out.grid.front());
    d.prior_mass = 1.0;
    d.posterior_mass = m.mass;
    d.posterior_mean = state.mean(0);
    d.posterior_std = std::sqrt(state.cov(0, 0));
    out.diagnostics.push_back(d);
    out.priors.push_back(std::move(prior));
    out.posteriors.push_back(std::move(post));
  }
  return out;
}

inline OracleSeries grid_oracle_series(const ExperimentConfig& cfg,
                                       const ObservationPath& obs) {
  OracleSeries out;
  const FilterModel model = cfg.build_model();
  const auto steps = grid_splitting_filter(model, cfg.domain(), cfg.grid_points, obs,
                                           gaussian_density(cfg.init_mean, cfg.init_std),
                                           cfg.grid_substeps);
  // moments on the solver grid; emission resampled onto the evaluation grid
  // so oracle and neural artifacts stay directly comparable
  out.grid = uniform_grid(cfg.domain(), cfg.eval_grid_points);
  Eigen::MatrixXd eval_pts(static_cast<Eigen::Index>(out.grid.size()), 1);
  for (std::size_t i = 0; i < out.grid.size(); ++i)
    eval_pts(static_cast<Eigen::Index>(i), 0) = out.grid[i];
  for (std::size_t n = 0; n < steps.size(); ++n) {
    const auto& post = steps[n].posterior;
    const auto m = density_moments(post.values, post.spacing, post.x.front());
    const auto mp = density_moments(steps[n].prior.values, post.spacing, post.x.front());
    StepDiagnostics d;
    d.step = static_cast<int>(n) + 1;
    d.time = obs.times[n + 1];
    d.z_n = (obs.values[n + 1] - obs.values[n]) / (obs.times[n + 1] - obs.times[n]);
    d.prior_mass = mp.mass;
    d.posterior_mass = m.mass;
    d.posterior_mean = m.mean;
    d.posterior_std = m.std;
    out.diagnostics.push_back(d);
    const Eigen::VectorXd pr =
        grid_interpolant_density(steps[n].prior.x, steps[n].prior.values)(eval_pts);
    const Eigen::VectorXd po = grid_interpolant_density(post.x, post.values)(eval_pts);
    out.priors.emplace_back(pr.data(), pr.data() + pr.size());
    out.posteriors.emplace_back(po.data(), po.data() + po.size());
  }
  return out;
}

// Chained Monte-Carlo splitting filter: the prior of each step is the
// pointwise Feynman-Kac estimate started from the previous grid posterior.
inline OracleSeries fk_oracle_series(const ExperimentConfig& cfg,
                                     const ObservationPath& obs) {
  OracleSeries out;
  const FilterModel model = cfg.build_model();
  const Domain domain = cfg.domain();
  out.grid = uniform_grid(domain, cfg.eval_grid_points);
  const double dx = out.grid[1] - out.grid[0];
  const double h1 = cfg.family == ModelFamily::linear ? cfg.lin_H : cfg.ben_h1;
  const double h2 = cfg.family == ModelFamily::linear ? cfg.lin_gamma : cfg.ben_h2;

  BatchDensityFn psi = gaussian_batch_density(cfg.init_mean, cfg.init_std);
  for (int n = 1; n <= cfg.n_steps; ++n) {
    const double t0 = obs.times[static_cast<std::size_t>(n - 1)];
    const double t1 = obs.times[static_cast<std::size_t>(n)];
    auto fk = fk_pointwise_reference(model, psi, out.grid, t0, t1, cfg.substeps,
                                     cfg.fk_paths_per_point, cfg.seed,
                                     static_cast<std::uint64_t>(n) + 0x8000u, cfg.workers);
    const double dt = t1 - t0;
    const double z_n = (obs.values[static_cast<std::size_t>(n)] -
                        obs.values[static_cast<std::size_t>(n - 1)]) /
                       dt;
    const Likelihood lik{z_n, dt, h1, h2};
    std::vector<double> post(fk.values.size());
    for (std::size_t i = 0; i < post.size(); ++i) post[i] = fk.values[i] * lik(out.grid[i]);
    const auto raw = density_moments(post, dx, out.grid.front());
    for (auto& v : post) v /= raw.mass;
    const auto mp = density_moments(fk.values, dx, out.grid.front());
    const auto m = density_moments(post, dx, out.grid.front());
    StepDiagnostics d;
    d.step = n;
    d.time = t1;
    d.z_n = z_n;
    d.c_n = raw.mass;
    d.prior_mass = mp.mass;
    d.posterior_mass = m.mass;
    d.posterior_mean = m.mean;
    d.posterior_std = m.std;
    out.diagnostics.push_back(d);
    out.priors.push_back(fk.values);
    psi = grid_interpolant_density(out.grid, post);
    out.posteriors.push_back(std::move(post));
  }
  return out;
}

inline void write_oracle_series(const std::string& dir, const OracleSeries& series) {
  std::filesystem::create_directories(dir);
  {
    csvdetail::File f(dir + "/diagnostics.csv", "w");
    f.line(std::string("# diagnostics-schema v") + std::to_string(kDiagnosticsSchemaVersion));
    f.line(kDiagnosticsSchema);
    for (const auto& d : series.diagnostics) f.line(diagnostics_row(d));
  }
  for (std::size_t n = 0; n < series.posteriors.size(); ++n)
    write_density_csv(expdetail::step_file(dir, "posterior", static_cast<int>(n) + 1, "csv"),
                      series.grid, series.priors[n], series.posteriors[n]);
}

struct RunOutcome {
  int exit_code = 1;
  std::string out_dir;
  FilterRunResult result;
};

// Full experiment: simulate (or load) the observation path, run the optional
// oracle side by side, run the neural filter, and stream every artifact into
// the output directory.
inline RunOutcome run_experiment(ExperimentConfig cfg,
                                 const ObservationPath* supplied_obs = nullptr,
                                 bool emit_plots = false) {
  cfg.validate();
  RunOutcome outcome;
  if (cfg.out.empty())
    cfg.out = "runs/" + cfg.preset + "-seed" + std::to_string(cfg.seed);
  outcome.out_dir = cfg.out;
  std::filesystem::create_directories(cfg.out);
  std::filesystem::create_directories(cfg.out + "/checkpoints");

  const FilterModel model = cfg.build_model();
  const auto grid_time = TimeGrid::uniform(0.0, cfg.dt, cfg.n_steps, cfg.substeps);

  ObservationPath obs;
  if (supplied_obs) {
    obs = *supplied_obs;
  } else {
    const double x0 = cfg.x0, y0 = cfg.y0;
    auto [sig, fresh] = simulate_signal_observation(model, grid_time, {&x0, 1}, {&y0, 1}, cfg.seed);
    obs = std::move(fresh);
    write_signal_csv(cfg.out + "/signal.csv", sig.times, sig.values);
  }
  expdetail::write_text(cfg.out + "/config.txt", serialize_config(cfg));
  write_observations_csv(cfg.out + "/observations.csv", obs.times, obs.values);

  // oracle side runs
  std::optional<OracleSeries> oracle;
  switch (cfg.oracle_kind()) {
    case OracleKind::none:
      break;
    case OracleKind::kalman:
      if (cfg.family != ModelFamily::linear)
        throw ConfigError("kalman oracle needs the linear model");
      oracle = kalman_oracle_series(cfg, obs);
      write_oracle_series(cfg.out + "/kalman_oracle", *oracle);
      break;
    case OracleKind::grid:
      oracle = grid_oracle_series(cfg, obs);
      write_oracle_series(cfg.out + "/grid_oracle", *oracle);
      break;
    case OracleKind::fk:
      oracle = fk_oracle_series(cfg, obs);
      write_oracle_series(cfg.out + "/fk_oracle", *oracle);
      break;
  }

  ExactMomentsFn exact;
  if (oracle) {
    exact = [&oracle](int n) -> std::optional<std::pair<double, double>> {
      const auto& d = oracle->diagnostics[static_cast<std::size_t>(n - 1)];
      return std::make_pair(d.posterior_mean, d.posterior_std);
    };
  }

  csvdetail::File diag_file(cfg.out + "/diagnostics.csv", "w");
  diag_file.line(std::string("# diagnostics-schema v") +
                 std::to_string(kDiagnosticsSchemaVersion));
  diag_file.line(kDiagnosticsSchema);

  const StepCallback on_step = [&](const FilterStepRecord& rec) {
    if (rec.diagnostics.acceptance_rate < 0.9)
      std::fprintf(stderr, "warning: step %d acceptance rate %.3f below 0.9\n",
                   rec.step, rec.diagnostics.acceptance_rate);
    diag_file.line(diagnostics_row(rec.diagnostics));
    std::fflush(diag_file.get());
    write_density_csv(expdetail::step_file(cfg.out, "posterior", rec.step, "csv"),
                      rec.grid, rec.prior_values, rec.posterior_values);
    expdetail::write_training_csv(
        expdetail::step_file(cfg.out, "training", rec.step, "csv"), rec.training);
    save_density(rec.posterior.prior,
                 expdetail::step_file(cfg.out + "/checkpoints", "net", rec.step, "bin"));
  };

  outcome.result = run_filter(cfg, obs, exact, on_step);
  if (!outcome.result.completed) {
    expdetail::write_text(cfg.out + "/ERROR",
                          "aborted at step " + std::to_string(outcome.result.abort_step) +
                              ": " + outcome.result.abort_reason + "\n");
    outcome.exit_code = 2;
    return outcome;
  }
  outcome.exit_code = 0;
  (void)emit_plots;  // plot emission is wired up by the CLI layer
  return outcome;
}

struct CompareReport {
  int steps = 0;
  double max_l2 = 0.0;
  double max_abs_mean_diff = 0.0;
  std::vector<double> l2;
  std::vector<double> mean_diff;
  bool thresholds_ok = true;
};

// Per-step L2 and mean differences between two run directories sharing a
// grid and step count. Optional criteria file: flat keys max_l2 and
// max_abs_mean_diff; violation flips thresholds_ok.
inline CompareReport compare_runs(const std::string& dir_a, const std::string& dir_b,
                                  const std::string& criteria_path = "",
                                  const std::string& report_path = "") {
  CompareReport report;
  for (int n = 1;; ++n) {
    const std::string fa = expdetail::step_file(dir_a, "posterior", n, "csv");
    const std::string fb = expdetail::step_file(dir_b, "posterior", n, "csv");
    if (!std::filesystem::exists(fa) || !std::filesystem::exists(fb)) break;
    const auto a = read_density_csv(fa);
    const auto b = read_density_csv(fb);
    if (a.x.size() != b.x.size() || std::abs(a.x.front() - b.x.front()) > 1e-12 ||
        std::abs(a.x.back() - b.x.back()) > 1e-12)
      throw ConfigError("compare: incompatible grids at step " + std::to_string(n));
    const double dx = a.x[1] - a.x[0];
    const double l2 = l2_grid_error(a.posterior, b.posterior, dx);
    const auto ma = density_moments(a.posterior, dx, a.x.front());
    const auto mb = density_moments(b.posterior, dx, b.x.front());
    const double md = std::abs(ma.mean - mb.mean);
    report.l2.push_back(l2);
    report.mean_diff.push_back(md);
    report.max_l2 = std::max(report.max_l2, l2);
    report.max_abs_mean_diff = std::max(report.max_abs_mean_diff, md);
    ++report.steps;
  }
  if (report.steps == 0) throw ConfigError("compare: no matching posterior files");

  if (!criteria_path.empty()) {
    std::ifstream f(criteria_path);
    if (!f) throw ConfigError("cannot open criteria file " + criteria_path);
    std::string key, eq;
    double value;
    while (f >> key >> eq >> value) {
      if (key == "max_l2" && report.max_l2 > value) report.thresholds_ok = false;
      else if (key == "max_abs_mean_diff" && report.max_abs_mean_diff > value)
        report.thresholds_ok = false;
      else if (key != "max_l2" && key != "max_abs_mean_diff")
        throw ConfigError("unknown criteria key '" + key + "'");
    }
  }
  if (!report_path.empty()) {
    csvdetail::File f(report_path, "w");
    f.line("step,l2,abs_mean_diff");
    for (int n = 0; n < report.steps; ++n)
      f.line(std::to_string(n + 1) + "," + csvdetail::fmt(report.l2[static_cast<std::size_t>(n)]) +
             "," + csvdetail::fmt(report.mean_diff[static_cast<std::size_t>(n)]));
  }
  return report;
}

// Standalone oracle run: same artifact shapes as a neural run directory.
inline RunOutcome oracle_experiment(ExperimentConfig cfg, OracleKind kind,
                                    const std::string& obs_dir = "") {
  cfg.validate();
  RunOutcome outcome;
  if (cfg.out.empty())
    cfg.out = "runs/oracle-" + cfg.preset + "-seed" + std::to_string(cfg.seed);
  outcome.out_dir = cfg.out;
  std::filesystem::create_directories(cfg.out);

  ObservationPath obs;
  if (!obs_dir.empty()) {
    const auto loaded = read_observations_csv(obs_dir + "/observations.csv");
    obs.times = loaded.times;
    obs.values = loaded.values;
    obs.dim = 1;
    if (static_cast<int>(obs.times.size()) != cfg.n_steps + 1)
      throw ConfigError("oracle: observation path does not match n_steps");
  } else {
    const FilterModel model = cfg.build_model();
    const auto grid_time = TimeGrid::uniform(0.0, cfg.dt, cfg.n_steps, cfg.substeps);
    const double x0 = cfg.x0, y0 = cfg.y0;
    auto [sig, fresh] = simulate_signal_observation(model, grid_time, {&x0, 1}, {&y0, 1}, cfg.seed);
    obs = std::move(fresh);
    write_signal_csv(cfg.out + "/signal.csv", sig.times, sig.values);
  }
  expdetail::write_text(cfg.out + "/config.txt", serialize_config(cfg));
  write_observations_csv(cfg.out + "/observations.csv", obs.times, obs.values);

  OracleSeries series;
  switch (kind) {
    case OracleKind::kalman:
      series = kalman_oracle_series(cfg, obs);
      break;
    case OracleKind::grid:
      series = grid_oracle_series(cfg, obs);
      break;
    case OracleKind::fk:
      series = fk_oracle_series(cfg, obs);
      break;
    case OracleKind::none:
      throw ConfigError("oracle run needs an oracle kind");
  }
  {
    csvdetail::File f(cfg.out + "/diagnostics.csv", "w");
    f.line(std::string("# diagnostics-schema v") + std::to_string(kDiagnosticsSchemaVersion));
    f.line(kDiagnosticsSchema);
    for (const auto& d : series.diagnostics) f.line(diagnostics_row(d));
  }
  for (std::size_t n = 0; n < series.posteriors.size(); ++n)
    write_density_csv(expdetail::step_file(cfg.out, "posterior", static_cast<int>(n) + 1, "csv"),
                      series.grid, series.priors[n], series.posteriors[n]);
  outcome.exit_code = 0;
  return outcome;
}

}  // namespace splitfilter
