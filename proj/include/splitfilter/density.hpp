#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace splitfilter {

// Density evaluable on all of R^d (zero outside its support).
using DensityFn = std::function<double(std::span<const double>)>;

// Batched evaluation: one row per point. The hot loops (training targets,
// Monte-Carlo references) evaluate the previous posterior at many points at
// once, which keeps the network inference inside a single matrix product.
using BatchDensityFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

inline BatchDensityFn from_pointwise(DensityFn f) {
  return [f = std::move(f)](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd out(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      Eigen::RowVectorXd row = pts.row(i);
      out(i) = f(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    }
    return out;
  };
}

inline double normal_pdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return std::exp(-0.5 * z * z) / (stddev * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_cdf(double x, double mean = 0.0, double stddev = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::numbers::sqrt2));
}

// 1-d Gaussian as both interfaces.
inline DensityFn gaussian_density(double mean, double stddev) {
  return [mean, stddev](std::span<const double> x) {
    return normal_pdf(x[0], mean, stddev);
  };
}

inline BatchDensityFn gaussian_batch_density(double mean, double stddev) {
  return [mean, stddev](const Eigen::MatrixXd& pts) {
    const double norm = 1.0 / (stddev * std::sqrt(2.0 * std::numbers::pi));
    Eigen::VectorXd z = (pts.col(0).array() - mean) / stddev;
    return ((-0.5 * z.array().square()).exp() * norm).matrix().eval();
  };
}

// Linear interpolation of values tabulated on a uniform 1-d grid, zero
// outside its range.
inline BatchDensityFn grid_interpolant_density(std::vector<double> x,
                                               std::vector<double> values) {
  const double lo = x.front(), hi = x.back();
  const double dx = x[1] - x[0];
  return [lo, hi, dx, values = std::move(values)](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd out(pts.rows());
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const double z = pts(i, 0);
      if (z < lo || z > hi) {
        out(i) = 0.0;
        continue;
      }
      auto k = static_cast<std::ptrdiff_t>((z - lo) / dx);
      if (k >= n - 1) k = n - 2;
      const double w = (z - (lo + dx * static_cast<double>(k))) / dx;
      out(i) = (1.0 - w) * values[static_cast<std::size_t>(k)] +
               w * values[static_cast<std::size_t>(k + 1)];
    }
    return out;
  };
}

}  // namespace splitfilter
