#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "splitfilter/density.hpp"
#include "splitfilter/diagnostics.hpp"
#include "splitfilter/domain.hpp"
#include "splitfilter/errors.hpp"
#include "splitfilter/model.hpp"
#include "splitfilter/parallel.hpp"
#include "splitfilter/rng.hpp"
#include "splitfilter/sde.hpp"

namespace splitfilter {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Kalman-Bucy recursion (linear-Gaussian oracle)
// ---------------------------------------------------------------------------

struct KalmanState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Continuous-discrete recursion for the integrated-observation model: the
// moment ODEs dm/dt = M m + eta, dP/dt = M P + P M' + Sigma Sigma' are
// Euler-stepped on the fine grid, then the scaled increment z = dY/dt is
// assimilated as a linear observation with noise variance I/dt.
inline KalmanState kalman_bucy_step(const KalmanState& state,
                                    const LinearModelParams& params,
                                    std::span<const double> dY, double dt,
                                    int substeps) {
  if (!(dt > 0.0) || substeps < 1)
    throw ConfigError("kalman_bucy_step needs dt > 0 and substeps >= 1");
  const int d = params.dim_signal, m = params.dim_obs;
  const Eigen::Map<const RowMat> M(params.M.data(), d, d);
  const Eigen::Map<const Eigen::VectorXd> eta(params.eta.data(), d);
  const Eigen::Map<const RowMat> Sigma(params.Sigma.data(), d, params.dim_noise);
  const Eigen::Map<const RowMat> H(params.H.data(), m, d);
  const Eigen::Map<const Eigen::VectorXd> gamma(params.gamma.data(), m);
  const Eigen::MatrixXd Q = Sigma * Sigma.transpose();

  Eigen::VectorXd mean = state.mean;
  Eigen::MatrixXd P = state.cov;
  const double tau = dt / substeps;
  for (int j = 0; j < substeps; ++j) {
    mean += tau * (M * mean + eta);
    P += tau * (M * P + P * M.transpose() + Q);
  }

  Eigen::Map<const Eigen::VectorXd> dy(dY.data(), m);
  const Eigen::VectorXd z = dy / dt;
  Eigen::MatrixXd S = H * P * H.transpose();
  S.diagonal().array() += 1.0 / dt;
  const Eigen::MatrixXd K = P * H.transpose() * S.inverse();
  mean += K * (z - H * mean - gamma);
  P = P - K * H * P;
  P = 0.5 * (P + P.transpose()).eval();

  if (Eigen::LLT<Eigen::MatrixXd>(P).info() != Eigen::Success)
    throw NumericalError("kalman_bucy_step: covariance lost positivity; reduce substep");
  return {std::move(mean), std::move(P)};
}

// Full recursion over an observation path, one state per observation time.
inline std::vector<KalmanState> kalman_bucy_filter(const LinearModelParams& params,
                                                   const ObservationPath& obs,
                                                   const KalmanState& initial,
                                                   int substeps) {
  std::vector<KalmanState> states;
  states.reserve(static_cast<std::size_t>(obs.times.size()));
  KalmanState s = initial;
  for (std::size_t n = 1; n < obs.times.size(); ++n) {
    const double dt = obs.times[n] - obs.times[n - 1];
    std::vector<double> dy(static_cast<std::size_t>(obs.dim));
    for (int i = 0; i < obs.dim; ++i)
      dy[static_cast<std::size_t>(i)] =
          obs.values[n * static_cast<std::size_t>(obs.dim) + static_cast<std::size_t>(i)] -
          obs.values[(n - 1) * static_cast<std::size_t>(obs.dim) + static_cast<std::size_t>(i)];
    s = kalman_bucy_step(s, params, dy, dt, substeps);
    states.push_back(s);
  }
  return states;
}

// ---------------------------------------------------------------------------
// Sobol points (dimension 1)
// ---------------------------------------------------------------------------

// First n points of the one-dimensional Sobol sequence (van der Corput in
// base 2 under Gray-code ordering), mapped onto the domain interval.
inline std::vector<double> sobol_points_1d(int n, const Domain& domain) {
  if (domain.dim() != 1) throw ConfigError("sobol_points_1d needs a 1-d domain");
  std::vector<double> pts(static_cast<std::size_t>(n));
  const double lo = domain.bound(0).lo, hi = domain.bound(0).hi;
  std::uint64_t state = 0;
  for (int i = 0; i < n; ++i) {
    pts[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * (static_cast<double>(state) * 0x1.0p-64);
    // lowest zero bit of i
    std::uint64_t v = static_cast<std::uint64_t>(i);
    int c = 0;
    while (v & 1ull) {
      v >>= 1;
      ++c;
    }
    state ^= (0x8000000000000000ull >> c);
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Pointwise Feynman-Kac Monte-Carlo reference
// ---------------------------------------------------------------------------

struct FkReference {
  std::vector<double> values;
  std::vector<double> std_errors;
};

// Plain Monte-Carlo estimate of u(t, x) = E[ psi(X_t) exp(-int k) | X_0 = x ]
// per evaluation point, with per-point standard errors. Paths use the same
// Euler discretization and left-endpoint potential rule as the training
// batches.
inline FkReference fk_pointwise_reference(const FilterModel& model,
                                          const BatchDensityFn& psi,
                                          std::span<const double> points, double t_start,
                                          double t_end, int substeps, int paths_per_point,
                                          std::uint64_t seed, std::uint64_t stream_key = 0,
                                          int workers = 1) {
  if (paths_per_point < 100)
    throw ConfigError("fk_pointwise_reference needs paths_per_point >= 100");
  if (!(t_end > t_start) || substeps < 1)
    throw ConfigError("fk_pointwise_reference: bad time interval");
  const int d = model.dim_signal, p = model.dim_noise;
  const int n_points = static_cast<int>(points.size()) / d;
  const double tau = (t_end - t_start) / substeps;
  const double sq_tau = std::sqrt(tau);

  FkReference ref;
  ref.values.resize(static_cast<std::size_t>(n_points));
  ref.std_errors.resize(static_cast<std::size_t>(n_points));

  parallel_for(
      n_points,
      [&](int i) {
        auto stream = rng::substream(seed, rng::Purpose::fk_reference, stream_key,
                                     static_cast<std::uint64_t>(i));
        std::vector<double> x(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d)),
            s(static_cast<std::size_t>(d * p)), xn(static_cast<std::size_t>(d));
        if (model.constant_dispersion) s = model.dispersion_value;
        Eigen::MatrixXd terminals(paths_per_point, d);
        Eigen::VectorXd weights(paths_per_point);
        for (int path = 0; path < paths_per_point; ++path) {
          for (int c = 0; c < d; ++c)
            x[static_cast<std::size_t>(c)] = points[static_cast<std::size_t>(i * d + c)];
          double pot = 0.0;
          for (int j = 0; j < substeps; ++j) {
            pot -= model.potential(x) * tau;
            model.aux_drift(x, b);
            if (!model.constant_dispersion) model.dispersion(x, s);
            for (int c = 0; c < d; ++c)
              xn[static_cast<std::size_t>(c)] =
                  x[static_cast<std::size_t>(c)] + b[static_cast<std::size_t>(c)] * tau;
            for (int k = 0; k < p; ++k) {
              const double dw = sq_tau * stream.normal();
              for (int c = 0; c < d; ++c)
                xn[static_cast<std::size_t>(c)] += s[static_cast<std::size_t>(c * p + k)] * dw;
            }
            x = xn;
          }
          for (int c = 0; c < d; ++c) terminals(path, c) = x[static_cast<std::size_t>(c)];
          weights(path) = std::exp(-pot);
        }
        const Eigen::VectorXd samples = psi(terminals).cwiseProduct(weights);
        const double n = static_cast<double>(paths_per_point);
        const double mean = samples.mean();
        const double var =
            (samples.array() - mean).square().sum() / (n - 1.0);
        ref.values[static_cast<std::size_t>(i)] = mean;
        ref.std_errors[static_cast<std::size_t>(i)] =
            std::sqrt((var > 0.0 ? var : 0.0) / n);
      },
      workers);
  return ref;
}

// ---------------------------------------------------------------------------
// Grid splitting-up solver (1-d classical method)
// ---------------------------------------------------------------------------

struct GridDensity {
  Domain domain;
  std::vector<double> x;
  std::vector<double> values;
  double spacing = 0.0;
};

inline GridDensity make_grid_density(const Domain& domain, int n_points,
                                     const DensityFn& init) {
  GridDensity g;
  g.domain = domain;
  g.x = uniform_grid(domain, n_points);
  g.spacing = g.x[1] - g.x[0];
  g.values.resize(g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i)
    g.values[i] = init(std::span<const double>(&g.x[i], 1));
  g.values.front() = 0.0;  // zero Dirichlet boundary
  g.values.back() = 0.0;
  const auto m = density_moments(g.values, g.spacing, g.x.front());
  for (auto& v : g.values) v /= m.mass;
  return g;
}

namespace detail {

struct GridCoefficients {
  std::vector<double> a, b, r;  // diffusion, auxiliary drift, potential per node
};

inline GridCoefficients grid_coefficients(const GridDensity& g, const FilterModel& model) {
  GridCoefficients c;
  const std::size_t n = g.x.size();
  c.a.resize(n);
  c.b.resize(n);
  c.r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> x(&g.x[i], 1);
    double av = 0.0, bv = 0.0;
    model.diffusion(x, {&av, 1});
    model.aux_drift(x, {&bv, 1});
    c.a[i] = av;
    c.b[i] = bv;
    c.r[i] = model.potential(x);
  }
  return c;
}

inline double grid_stability_rate(const GridCoefficients& c, double dx) {
  double rate = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i) {
    const double l = 2.0 * c.a[i] / (dx * dx) + std::abs(c.b[i]) / dx + std::abs(c.r[i]);
    if (l > rate) rate = l;
  }
  return rate;
}

}  // namespace detail

inline int grid_auto_substeps(const GridDensity& g, const FilterModel& model, double dt,
                              double safety = 0.8) {
  const auto coeff = detail::grid_coefficients(g, model);
  const double rate = detail::grid_stability_rate(coeff, g.spacing);
  return std::max(1, static_cast<int>(std::ceil(dt * rate / safety)));
}

// Explicit finite-difference step of the prediction PDE
//   dq/dt = a q_xx + b q_x + r q
// (the expanded adjoint generator) with zero Dirichlet boundary.
inline void grid_predict(GridDensity& g, const FilterModel& model, double dt,
                         int substeps, double cfl_safety = 0.8) {
  if (model.dim_signal != 1) throw ConfigError("grid solver is one-dimensional");
  const auto coeff = detail::grid_coefficients(g, model);
  const double rate = detail::grid_stability_rate(coeff, g.spacing);
  if (substeps < 1) substeps = std::max(1, static_cast<int>(std::ceil(dt * rate / cfl_safety)));
  const double tau = dt / substeps;
  if (tau * rate > 1.0)
    throw NumericalError("grid_predict: CFL violation; use at least " +
                         std::to_string(static_cast<int>(std::ceil(dt * rate))) +
                         " substeps");
  const std::size_t n = g.x.size();
  const double dx = g.spacing;
  std::vector<double> next(n, 0.0);
  for (int step = 0; step < substeps; ++step) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double lap = (g.values[i + 1] - 2.0 * g.values[i] + g.values[i - 1]) / (dx * dx);
      const double grad = (g.values[i + 1] - g.values[i - 1]) / (2.0 * dx);
      next[i] = g.values[i] +
                tau * (coeff.a[i] * lap + coeff.b[i] * grad + coeff.r[i] * g.values[i]);
    }
    next.front() = 0.0;
    next.back() = 0.0;
    g.values.swap(next);
  }
}

// Correction step: pointwise multiply by the likelihood and renormalize to
// unit trapezoid mass.
inline void grid_correct(GridDensity& g, const std::function<double(double)>& xi) {
  for (std::size_t i = 0; i < g.x.size(); ++i) g.values[i] *= xi(g.x[i]);
  const auto m = density_moments(g.values, g.spacing, g.x.front());
  for (auto& v : g.values) v /= m.mass;
}

struct GridFilterStep {
  GridDensity prior;      // after prediction, before correction
  GridDensity posterior;  // after correction
};

// Classical splitting-up filter on the grid: per observation interval a
// finite-difference prediction and the exp(-dt/2 |z_n - h(x)|^2) correction.
inline std::vector<GridFilterStep> grid_splitting_filter(
    const FilterModel& model, const Domain& domain, int n_points,
    const ObservationPath& obs, const DensityFn& initial, int substeps_per_interval = 0,
    double cfl_safety = 0.8) {
  if (model.dim_signal != 1 || model.dim_obs != 1)
    throw ConfigError("grid_splitting_filter is one-dimensional");
  GridDensity g = make_grid_density(domain, n_points, initial);
  std::vector<GridFilterStep> steps;
  steps.reserve(obs.times.size() - 1);
  for (std::size_t n = 1; n < obs.times.size(); ++n) {
    const double dt = obs.times[n] - obs.times[n - 1];
    grid_predict(g, model, dt, substeps_per_interval, cfl_safety);
    GridFilterStep rec;
    rec.prior = g;
    const double z_n = (obs.values[n] - obs.values[n - 1]) / dt;
    grid_correct(g, [&](double x) {
      double h = 0.0;
      model.sensor(std::span<const double>(&x, 1), {&h, 1});
      const double diff = z_n - h;
      return std::exp(-0.5 * dt * diff * diff);
    });
    rec.posterior = g;
    steps.push_back(std::move(rec));
  }
  return steps;
}

}  // namespace splitfilter
