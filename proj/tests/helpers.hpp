#pragma once

// Test-only oracles: finite-difference derivatives for cross-checking the
// closed-form model coefficients and gradients, and a two-sample
// Kolmogorov-Smirnov test for distributional agreement.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace testutil {

// Central finite-difference d/dx_i of a scalar function at x.
inline double fd_partial(const std::function<double(std::span<const double>)>& f,
                         std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double xi = x[i];
  x[i] = xi + h;
  const double up = f(x);
  x[i] = xi - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Finite-difference divergence of a vector field (sum_i d f_i / d x_i).
inline double fd_divergence(
    const std::function<void(std::span<const double>, std::span<double>)>& field, int dim,
    std::span<const double> x, double h = 1e-5) {
  double div = 0.0;
  std::vector<double> xv(x.begin(), x.end());
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    div += fd_partial(
        [&](std::span<const double> p) {
          field(p, out);
          return out[static_cast<std::size_t>(i)];
        },
        xv, static_cast<std::size_t>(i), h);
  }
  return div;
}

// vecdiv(a)_j = sum_i d a_ij / d x_i for a row-major matrix field.
inline std::vector<double> fd_vecdiv(
    const std::function<void(std::span<const double>, std::span<double>)>& mat_field,
    int dim, std::span<const double> x, double h = 1e-5) {
  std::vector<double> result(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> xv(x.begin(), x.end());
  std::vector<double> out(static_cast<std::size_t>(dim * dim));
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i)
      result[static_cast<std::size_t>(j)] += fd_partial(
          [&](std::span<const double> p) {
            mat_field(p, out);
            return out[static_cast<std::size_t>(i * dim + j)];
          },
          xv, static_cast<std::size_t>(i), h);
  return result;
}

// Asymptotic p-value of the two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  // Kolmogorov survival function
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

struct SampleStats {
  double mean = 0.0;
  double var = 0.0;
  std::size_t n = 0;
};

inline SampleStats sample_stats(std::span<const double> xs) {
  SampleStats s;
  s.n = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  for (double x : xs) s.var += (x - s.mean) * (x - s.mean);
  s.var /= static_cast<double>(s.n - 1);
  return s;
}

}  // namespace testutil
