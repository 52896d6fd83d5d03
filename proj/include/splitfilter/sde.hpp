#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "splitfilter/domain.hpp"
#include "splitfilter/errors.hpp"
#include "splitfilter/model.hpp"
#include "splitfilter/parallel.hpp"
#include "splitfilter/rng.hpp"

namespace splitfilter {

// Coarse observation grid t_0 < ... < t_N with J fine substeps per interval.
struct TimeGrid {
  std::vector<double> times;
  int substeps = 1;  // J

  static TimeGrid uniform(double t0, double dt, int n_intervals, int substeps) {
    TimeGrid g;
    g.times.resize(static_cast<std::size_t>(n_intervals) + 1);
    for (int n = 0; n <= n_intervals; ++n)
      g.times[static_cast<std::size_t>(n)] = t0 + dt * n;
    g.substeps = substeps;
    g.validate();
    return g;
  }

  int n_intervals() const { return static_cast<int>(times.size()) - 1; }

  void validate() const {
    if (times.size() < 2) throw ConfigError("time grid needs at least one interval");
    if (substeps < 1) throw ConfigError("time grid needs substeps >= 1");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw ConfigError("time grid must be strictly increasing");
  }
};

struct SignalPath {
  std::vector<double> times;   // fine grid, N*J + 1 points
  std::vector<double> values;  // (N*J + 1) x d, row-major
  int dim = 1;

  std::span<const double> at(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

struct ObservationPath {
  std::vector<double> times;   // coarse grid, N + 1 points
  std::vector<double> values;  // (N + 1) x m, row-major
  int dim = 1;
  std::uint64_t seed = 0;

  std::span<const double> at(int n) const {
    return {values.data() + static_cast<std::size_t>(n) * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

// Batch of auxiliary-diffusion trajectories started uniformly on the domain.
// potential_integrals[i] stores the left-endpoint sum of k = -r along path i:
//   sum_j k(X_{tau_j}) (tau_{j+1} - tau_j),
// so the Feynman-Kac weight is exp(-potential_integrals[i]) = exp(int r).
struct PathBatch {
  int n_paths = 0;
  int substeps = 0;  // J
  int dim = 1;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<double> starts;               // n_paths x d
  std::vector<double> trajectories;         // n_paths x (J+1) x d
  std::vector<double> potential_integrals;  // n_paths

  std::span<const double> start(int i) const {
    return {starts.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> point(int i, int j) const {
    const std::size_t row =
        (static_cast<std::size_t>(i) * static_cast<std::size_t>(substeps + 1) +
         static_cast<std::size_t>(j)) *
        static_cast<std::size_t>(dim);
    return {trajectories.data() + row, static_cast<std::size_t>(dim)};
  }
  std::span<const double> terminal(int i) const { return point(i, substeps); }
};

// Euler-Maruyama simulation of the signal and the integrated observation
//   Y_{t_n} - Y_{t_{n-1}} = sum_fine h(X_s) ds + (W_{t_n} - W_{t_{n-1}}),
// with independent substreams for V and W derived from the seed.
inline std::pair<SignalPath, ObservationPath> simulate_signal_observation(
    const FilterModel& model, const TimeGrid& grid, std::span<const double> x0,
    std::span<const double> y0, std::uint64_t seed) {
  grid.validate();
  const int d = model.dim_signal, m = model.dim_obs, p = model.dim_noise;
  const int N = grid.n_intervals(), J = grid.substeps;

  SignalPath sig;
  sig.dim = d;
  sig.times.resize(static_cast<std::size_t>(N * J) + 1);
  sig.values.resize((static_cast<std::size_t>(N * J) + 1) * static_cast<std::size_t>(d));

  ObservationPath obs;
  obs.dim = m;
  obs.seed = seed;
  obs.times = grid.times;
  obs.values.resize(static_cast<std::size_t>(N + 1) * static_cast<std::size_t>(m));

  std::vector<double> x(x0.begin(), x0.end());
  for (int i = 0; i < m; ++i) obs.values[static_cast<std::size_t>(i)] = y0[static_cast<std::size_t>(i)];
  for (int i = 0; i < d; ++i) sig.values[static_cast<std::size_t>(i)] = x0[static_cast<std::size_t>(i)];
  sig.times[0] = grid.times[0];

  std::vector<double> f(static_cast<std::size_t>(d)), s(static_cast<std::size_t>(d * p)),
      h(static_cast<std::size_t>(m)), xn(static_cast<std::size_t>(d));
  if (model.constant_dispersion) s = model.dispersion_value;

  std::size_t fine = 1;
  for (int n = 0; n < N; ++n) {
    auto v_stream = rng::substream(seed, rng::Purpose::signal_noise, static_cast<std::uint64_t>(n));
    auto w_stream =
        rng::substream(seed, rng::Purpose::observation_noise, static_cast<std::uint64_t>(n));
    const double dt = grid.times[static_cast<std::size_t>(n) + 1] - grid.times[static_cast<std::size_t>(n)];
    const double tau = dt / J;
    const double sq_tau = std::sqrt(tau);
    std::vector<double> dy(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < J; ++j) {
      model.drift(x, f);
      if (!model.constant_dispersion) model.dispersion(x, s);
      model.sensor(x, h);
      for (int i = 0; i < m; ++i)
        dy[static_cast<std::size_t>(i)] +=
            h[static_cast<std::size_t>(i)] * tau + sq_tau * w_stream.normal();
      for (int i = 0; i < d; ++i) xn[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + f[static_cast<std::size_t>(i)] * tau;
      for (int k = 0; k < p; ++k) {
        const double dw = sq_tau * v_stream.normal();
        for (int i = 0; i < d; ++i)
          xn[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(i * p + k)] * dw;
      }
      x = xn;
      sig.times[fine] = grid.times[static_cast<std::size_t>(n)] + tau * (j + 1);
      for (int i = 0; i < d; ++i)
        sig.values[fine * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
      ++fine;
    }
    sig.times[fine - 1] = grid.times[static_cast<std::size_t>(n) + 1];
    for (int i = 0; i < m; ++i)
      obs.values[(static_cast<std::size_t>(n) + 1) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] =
          obs.values[static_cast<std::size_t>(n) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] +
          dy[static_cast<std::size_t>(i)];
  }
  return {std::move(sig), std::move(obs)};
}

// Draws N_b auxiliary paths dX = b dt + sigma dW from i.i.d. uniform starts
// on the domain. Paths are not killed at the boundary; only the starts are
// confined. Substream of path i is (root, training_paths, stream_key, i).
inline PathBatch sample_auxiliary_batch(const FilterModel& model, const Domain& domain,
                                        double t_start, double t_end, int substeps,
                                        int n_paths, std::uint64_t root_seed,
                                        std::uint64_t stream_key, int workers = 1) {
  if (!(t_end > t_start)) throw ConfigError("auxiliary batch needs t_end > t_start");
  if (substeps < 1 || n_paths < 1)
    throw ConfigError("auxiliary batch needs substeps >= 1 and n_paths >= 1");
  if (domain.dim() != model.dim_signal)
    throw ConfigError("domain dimension does not match the model");

  const int d = model.dim_signal, p = model.dim_noise, J = substeps;
  PathBatch batch;
  batch.n_paths = n_paths;
  batch.substeps = J;
  batch.dim = d;
  batch.t_start = t_start;
  batch.t_end = t_end;
  batch.starts.resize(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(d));
  batch.trajectories.resize(static_cast<std::size_t>(n_paths) *
                            static_cast<std::size_t>(J + 1) * static_cast<std::size_t>(d));
  batch.potential_integrals.resize(static_cast<std::size_t>(n_paths));

  const double tau = (t_end - t_start) / J;
  const double sq_tau = std::sqrt(tau);

  parallel_for(
      n_paths,
      [&](int i) {
        auto stream = rng::substream(root_seed, rng::Purpose::training_paths, stream_key,
                                     static_cast<std::uint64_t>(i));
        std::vector<double> x(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d)),
            s(static_cast<std::size_t>(d * p)), xn(static_cast<std::size_t>(d));
        if (model.constant_dispersion) s = model.dispersion_value;
        for (int c = 0; c < d; ++c)
          x[static_cast<std::size_t>(c)] =
              stream.uniform(domain.bound(c).lo, domain.bound(c).hi);

        const std::size_t base = static_cast<std::size_t>(i) *
                                 static_cast<std::size_t>(J + 1) *
                                 static_cast<std::size_t>(d);
        for (int c = 0; c < d; ++c) {
          batch.starts[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) +
                       static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
          batch.trajectories[base + static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
        }

        double pot = 0.0;  // sum of k = -r, left-endpoint rule
        for (int j = 0; j < J; ++j) {
          pot -= model.potential(x) * tau;
          model.aux_drift(x, b);
          if (!model.constant_dispersion) model.dispersion(x, s);
          for (int c = 0; c < d; ++c)
            xn[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] + b[static_cast<std::size_t>(c)] * tau;
          for (int k = 0; k < p; ++k) {
            const double dw = sq_tau * stream.normal();
            for (int c = 0; c < d; ++c)
              xn[static_cast<std::size_t>(c)] += s[static_cast<std::size_t>(c * p + k)] * dw;
          }
          x = xn;
          const std::size_t row = base + static_cast<std::size_t>(j + 1) * static_cast<std::size_t>(d);
          for (int c = 0; c < d; ++c) batch.trajectories[row + static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
        }
        batch.potential_integrals[static_cast<std::size_t>(i)] = pot;
      },
      workers);
  return batch;
}

// Exact-in-distribution samples of the auxiliary OU diffusion
//   dX = -(M X + eta) dt + Sigma dW
// at time t, via the closed-form Gaussian transition (scalar models only).
// Note the mean carries the inhomogeneous -eta term alongside e^{-Mt} X_0.
struct OuTransition1d {
  double mean_factor = 1.0;  // e^{-M t}
  double mean_shift = 0.0;   // -eta * int_0^t e^{-M s} ds
  double variance = 0.0;     // Sigma^2 (1 - e^{-2 M t}) / (2 M)
};

inline OuTransition1d ou_transition_1d(const LinearModelParams& params, double t) {
  if (params.dim_signal != 1 || params.dim_noise != 1)
    throw ConfigError("ou_transition_1d requires a scalar linear model");
  const double M = params.M[0], eta = params.eta[0], Sigma = params.Sigma[0];
  OuTransition1d tr;
  tr.mean_factor = std::exp(-M * t);
  if (M != 0.0) {
    tr.mean_shift = -eta * (1.0 - std::exp(-M * t)) / M;
    tr.variance = Sigma * Sigma * (1.0 - std::exp(-2.0 * M * t)) / (2.0 * M);
  } else {
    tr.mean_shift = -eta * t;
    tr.variance = Sigma * Sigma * t;
  }
  return tr;
}

inline std::vector<double> sample_ou_explicit(const LinearModelParams& params,
                                              std::span<const double> starts, double t,
                                              std::uint64_t seed,
                                              std::uint64_t stream_key = 0) {
  const auto tr = ou_transition_1d(params, t);
  const double sd = std::sqrt(tr.variance);
  std::vector<double> out(starts.size());
  auto stream = rng::substream(seed, rng::Purpose::ou_sampler, stream_key);
  for (std::size_t i = 0; i < starts.size(); ++i)
    out[i] = tr.mean_factor * starts[i] + tr.mean_shift + sd * stream.normal();
  return out;
}

}  // namespace splitfilter
