#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "splitfilter/errors.hpp"

namespace splitfilter {

struct DensityMoments {
  double mass = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

// Trapezoid-rule mass, mean and standard deviation of grid values on a
// uniform 1-d grid starting at x0.
inline DensityMoments density_moments(std::span<const double> values, double spacing,
                                      double x0) {
  if (values.size() < 2) throw ConfigError("density_moments needs >= 2 grid points");
  double mass = 0.0, m1 = 0.0, m2 = 0.0;
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double x = x0 + spacing * static_cast<double>(i);
    mass += w * values[i];
    m1 += w * values[i] * x;
    m2 += w * values[i] * x * x;
  }
  mass *= spacing;
  m1 *= spacing;
  m2 *= spacing;
  if (!(mass > 0.0)) throw NumericalError("density_moments: nonpositive mass");
  DensityMoments out;
  out.mass = mass;
  out.mean = m1 / mass;
  const double var = m2 / mass - out.mean * out.mean;
  out.std = std::sqrt(var > 0.0 ? var : 0.0);
  return out;
}

// sqrt(sum_i w_i (u_i - v_i)^2 dx) with trapezoid end-weights, so a constant
// offset c over a unit interval evaluates to exactly c.
inline double l2_grid_error(std::span<const double> u, std::span<const double> v,
                            double spacing) {
  if (u.size() != v.size()) throw ConfigError("l2_grid_error: length mismatch");
  if (u.size() < 2) throw ConfigError("l2_grid_error needs >= 2 grid points");
  double acc = 0.0;
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double d = u[i] - v[i];
    acc += w * d * d;
  }
  return std::sqrt(acc * spacing);
}

// Discrete Gaussian-kernel smoothing on a uniform grid (kernel truncated at
// four bandwidths, renormalized per point near the ends).
inline std::vector<double> gaussian_smooth(std::span<const double> values, double spacing,
                                           double bandwidth) {
  if (!(bandwidth > 0.0) || !(spacing > 0.0))
    throw ConfigError("gaussian_smooth needs positive spacing and bandwidth");
  const int radius = static_cast<int>(std::ceil(4.0 * bandwidth / spacing));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    const double u = k * spacing / bandwidth;
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * u * u);
  }
  const int n = static_cast<int>(values.size());
  std::vector<double> out(values.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0, wsum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const int j = i + k;
      if (j < 0 || j >= n) continue;
      const double w = kernel[static_cast<std::size_t>(k + radius)];
      acc += w * values[static_cast<std::size_t>(j)];
      wsum += w;
    }
    out[static_cast<std::size_t>(i)] = acc / wsum;
  }
  return out;
}

// Indices of strict interior local maxima with value above the floor.
inline std::vector<int> local_maxima(std::span<const double> values, double floor = 0.0) {
  std::vector<int> peaks;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (values[i] > values[i - 1] && values[i] > values[i + 1] && values[i] > floor)
      peaks.push_back(static_cast<int>(i));
  }
  return peaks;
}

// Per-step record matching the four run diagnostics (absolute mean error,
// training L2 curve endpoint, prior mass, Monte-Carlo acceptance rate) plus
// the correction-step bookkeeping.
struct StepDiagnostics {
  int step = 0;
  double time = 0.0;
  double z_n = 0.0;
  double c_n = 0.0;
  double acceptance_rate = 0.0;
  double prior_mass = 0.0;
  double posterior_mass = 0.0;
  double posterior_mean = 0.0;
  double posterior_std = 0.0;
  double exact_mean = std::nan("");
  double exact_std = std::nan("");
  double abs_mean_error = std::nan("");
  double l2_vs_reference = std::nan("");
};

}  // namespace splitfilter
