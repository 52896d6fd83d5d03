#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splitfilter/config.hpp"
#include "splitfilter/density.hpp"
#include "splitfilter/diagnostics.hpp"
#include "splitfilter/domain.hpp"
#include "splitfilter/errors.hpp"
#include "splitfilter/nn.hpp"
#include "splitfilter/reference.hpp"
#include "splitfilter/sde.hpp"
#include "splitfilter/training.hpp"

namespace splitfilter {

// Correction factor of one observation interval, affine sensor h(z) = h1 z + h2:
//   xi_n(z) = exp(-(dt/2) |z_n - h(z)|^2),  z_n = (Y_{t_n} - Y_{t_{n-1}}) / dt.
struct Likelihood {
  double z_n = 0.0;
  double dt = 1.0;
  double h1 = 1.0;
  double h2 = 0.0;

  double operator()(double z) const {
    const double diff = z_n - (h1 * z + h2);
    return std::exp(-0.5 * dt * diff * diff);
  }
};

struct GaussianSampler {
  double mean = 0.0;
  double stddev = 1.0;
  double sample(rng::Stream& stream) const { return mean + stddev * stream.normal(); }
};

// Gaussian rewrite of the likelihood: xi_n is proportional to the pdf of
// N((z_n - h2)/h1, 1/(dt h1^2)).
inline GaussianSampler likelihood_sampler(const Likelihood& lik) {
  if (lik.h1 == 0.0)
    throw ConfigError("likelihood_sampler: sensor slope h1 = 0 is unsupported; "
                      "use quadrature normalization");
  return {(lik.z_n - lik.h2) / lik.h1, std::sqrt(1.0 / (lik.dt * lik.h1 * lik.h1))};
}

struct NormalizerEstimate {
  double c_n = 0.0;
  double acceptance_rate = 0.0;
};

// Monte-Carlo estimate of C_n = int xi_n(z) NN(z) dz by sampling from the
// likelihood Gaussian. Samples outside the domain contribute zero (network
// support); the in-domain fraction is the acceptance rate. With the
// prefactor sqrt(2 pi / (dt h1^2)) included, C_n estimates the integral
// itself and the posterior is a probability density; without it, the literal
// sample mean of the network is returned.
inline NormalizerEstimate estimate_normalizer(const NeuralDensity& prior,
                                              const Likelihood& lik, long n_samples,
                                              rng::Stream stream,
                                              bool include_prefactor = true) {
  if (n_samples < 1) throw ConfigError("estimate_normalizer needs n_samples >= 1");
  const GaussianSampler sampler = likelihood_sampler(lik);

  double sum = 0.0;
  long accepted = 0;
  constexpr long kChunk = 8192;
  std::vector<double> zs;
  zs.reserve(static_cast<std::size_t>(std::min(kChunk, n_samples)));
  long remaining = n_samples;
  while (remaining > 0) {
    const long count = std::min(kChunk, remaining);
    zs.clear();
    for (long i = 0; i < count; ++i) zs.push_back(sampler.sample(stream));
    const Eigen::VectorXd values = prior.evaluate_grid(zs);
    sum += values.sum();
    for (long i = 0; i < count; ++i)
      if (prior.domain.contains1d(zs[static_cast<std::size_t>(i)])) ++accepted;
    remaining -= count;
  }

  NormalizerEstimate est;
  est.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(n_samples);
  const double prefactor =
      include_prefactor ? std::sqrt(2.0 * std::numbers::pi / (lik.dt * lik.h1 * lik.h1))
                        : 1.0;
  est.c_n = prefactor * sum / static_cast<double>(n_samples);
  if (!std::isfinite(est.c_n))
    throw NumericalError("estimate_normalizer: non-finite C_n");
  if (est.c_n <= 0.0)
    throw DegeneratePosteriorError(
        "estimate_normalizer: C_n <= 0 (training failure or domain escape)");
  return est;
}

// Deterministic fallback for sensors without a usable Gaussian form.
inline NormalizerEstimate normalize_by_quadrature(const NeuralDensity& prior,
                                                  const Likelihood& lik, int n_points) {
  const auto xs = uniform_grid(prior.domain, n_points);
  const Eigen::VectorXd nn = prior.evaluate_grid(xs);
  const double dx = xs[1] - xs[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = (i == 0 || i + 1 == xs.size()) ? 0.5 : 1.0;
    acc += w * lik(xs[i]) * nn(static_cast<Eigen::Index>(i));
  }
  NormalizerEstimate est;
  est.c_n = acc * dx;
  est.acceptance_rate = 1.0;
  if (est.c_n <= 0.0)
    throw DegeneratePosteriorError("normalize_by_quadrature: C_n <= 0");
  return est;
}

// Posterior closure p^n(z) = (1/C_n) xi_n(z) NN(z) on the domain, 0 outside.
struct Posterior {
  NeuralDensity prior;
  Likelihood likelihood;
  double c_n = 1.0;
  double acceptance_rate = 1.0;

  double evaluate(double z) const {
    if (!prior.domain.contains1d(z)) return 0.0;
    return likelihood(z) * prior.evaluate1d(z) / c_n;
  }

  Eigen::VectorXd evaluate_grid(std::span<const double> zs) const {
    Eigen::VectorXd out = prior.evaluate_grid(zs);
    for (std::size_t i = 0; i < zs.size(); ++i)
      out(static_cast<Eigen::Index>(i)) *= likelihood(zs[i]) / c_n;
    return out;
  }

  BatchDensityFn batch_density() const {
    return [post = *this](const Eigen::MatrixXd& pts) {
      std::span<const double> zs(pts.col(0).data(), static_cast<std::size_t>(pts.rows()));
      return post.evaluate_grid(zs);
    };
  }
};

struct FilterStepRecord {
  int step = 0;
  double t = 0.0;
  Posterior posterior;
  StepDiagnostics diagnostics;
  TrainingReport training;
  // evaluation-grid snapshots for artifact emission
  std::vector<double> grid;
  std::vector<double> prior_values;
  std::vector<double> posterior_values;
};

struct FilterRunResult {
  bool completed = false;
  int abort_step = -1;
  std::string abort_reason;
  std::vector<FilterStepRecord> steps;
};

// Per-step oracle moments (mean, std) injected by the caller when an exact
// or reference solution is available for diagnostics.
using ExactMomentsFn = std::function<std::optional<std::pair<double, double>>(int)>;
using StepCallback = std::function<void(const FilterStepRecord&)>;

// Algorithm-1 loop: per observation interval, train a fresh prior network on
// the Feynman-Kac regression with psi = previous posterior, form the
// likelihood from the scaled observation increment, estimate C_n by
// Monte-Carlo, and hand the normalized closure to the next step.
inline FilterRunResult run_filter(const ExperimentConfig& cfg, const ObservationPath& obs,
                                  const ExactMomentsFn& exact_moments = {},
                                  const StepCallback& on_step = {}) {
  cfg.validate();
  if (static_cast<int>(obs.times.size()) != cfg.n_steps + 1)
    throw ConfigError("run_filter: observation path does not match n_steps");

  const FilterModel model = cfg.build_model();
  const Domain domain = cfg.domain();
  const NetworkArchitecture arch = cfg.architecture();
  const TrainingHyperparams hp = cfg.hyperparams();
  const double sensor_h1 = cfg.family == ModelFamily::linear ? cfg.lin_H : cfg.ben_h1;
  const double sensor_h2 = cfg.family == ModelFamily::linear ? cfg.lin_gamma : cfg.ben_h2;

  const std::vector<double> grid = uniform_grid(domain, cfg.eval_grid_points);
  const double dx = grid[1] - grid[0];

  FilterRunResult result;
  result.steps.reserve(static_cast<std::size_t>(cfg.n_steps));

  BatchDensityFn psi = gaussian_batch_density(cfg.init_mean, cfg.init_std);

  for (int n = 1; n <= cfg.n_steps; ++n) {
    const double t_prev = obs.times[static_cast<std::size_t>(n - 1)];
    const double t_cur = obs.times[static_cast<std::size_t>(n)];
    const double dt = t_cur - t_prev;

    // Optional Monte-Carlo reference for the prior PDE on a fixed point set,
    // with the previous numeric posterior as initial condition.
    TrainingReference reference;
    const TrainingReference* reference_ptr = nullptr;
    if (cfg.fk_reference) {
      reference.points = cfg.fk_sobol ? sobol_points_1d(201, domain)
                                      : uniform_grid(domain, 201);
      auto fk = fk_pointwise_reference(model, psi, reference.points, t_prev, t_cur,
                                       cfg.substeps, cfg.fk_paths_per_point, cfg.seed,
                                       static_cast<std::uint64_t>(n), cfg.workers);
      reference.values = std::move(fk.values);
      reference_ptr = &reference;
    }

    FilterStepRecord rec;
    rec.step = n;
    rec.t = t_cur;
    auto [density, report] =
        train_network(model, domain, t_prev, t_cur, psi, arch, hp, cfg.seed,
                      static_cast<std::uint64_t>(n), reference_ptr);
    rec.training = std::move(report);

    const double z_n = (obs.values[static_cast<std::size_t>(n)] -
                        obs.values[static_cast<std::size_t>(n - 1)]) /
                       dt;
    const Likelihood lik{z_n, dt, sensor_h1, sensor_h2};

    NormalizerEstimate est;
    try {
      est = estimate_normalizer(density, lik, cfg.normalizer_samples,
                                rng::substream(cfg.seed, rng::Purpose::normalizer,
                                               static_cast<std::uint64_t>(n)),
                                cfg.normalizer_prefactor);
    } catch (const DegeneratePosteriorError& e) {
      result.abort_step = n;
      result.abort_reason = e.what();
      return result;
    }

    rec.posterior = Posterior{std::move(density), lik, est.c_n, est.acceptance_rate};

    // diagnostics on the evaluation grid
    rec.grid = grid;
    const Eigen::VectorXd prior_vals = rec.posterior.prior.evaluate_grid(grid);
    const Eigen::VectorXd post_vals = rec.posterior.evaluate_grid(grid);
    rec.prior_values.assign(prior_vals.data(), prior_vals.data() + prior_vals.size());
    rec.posterior_values.assign(post_vals.data(), post_vals.data() + post_vals.size());

    StepDiagnostics& diag = rec.diagnostics;
    diag.step = n;
    diag.time = t_cur;
    diag.z_n = z_n;
    diag.c_n = est.c_n;
    diag.acceptance_rate = est.acceptance_rate;
    double prior_mass = 0.0;
    for (std::size_t i = 0; i < rec.prior_values.size(); ++i) {
      const double w = (i == 0 || i + 1 == rec.prior_values.size()) ? 0.5 : 1.0;
      prior_mass += w * rec.prior_values[i];
    }
    diag.prior_mass = prior_mass * dx;
    DensityMoments post_m;
    try {
      post_m = density_moments(rec.posterior_values, dx, grid.front());
    } catch (const NumericalError& e) {
      result.abort_step = n;
      result.abort_reason = e.what();
      return result;
    }
    diag.posterior_mass = post_m.mass;
    diag.posterior_mean = post_m.mean;
    diag.posterior_std = post_m.std;
    if (exact_moments) {
      if (const auto exact = exact_moments(n)) {
        diag.exact_mean = exact->first;
        diag.exact_std = exact->second;
        diag.abs_mean_error = std::abs(post_m.mean - exact->first);
      }
    }
    if (!rec.training.l2_checkpoints.empty())
      diag.l2_vs_reference = rec.training.l2_checkpoints.back().second;

    psi = rec.posterior.batch_density();
    result.steps.push_back(std::move(rec));
    if (on_step) on_step(result.steps.back());

    if (est.acceptance_rate < cfg.min_acceptance) {
      result.abort_step = n;
      result.abort_reason = "acceptance rate " + std::to_string(est.acceptance_rate) +
                            " below threshold " + std::to_string(cfg.min_acceptance);
      return result;
    }
  }
  result.completed = true;
  return result;
}

}  // namespace splitfilter
