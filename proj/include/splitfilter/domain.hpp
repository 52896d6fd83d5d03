#pragma once

#include <span>
#include <vector>

#include "splitfilter/errors.hpp"

namespace splitfilter {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Hypercube [lo_1,hi_1] x ... x [lo_d,hi_d] on which densities are truncated.
class Domain {
 public:
  Domain() = default;

  explicit Domain(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    for (const auto& b : bounds_) {
      if (!(b.lo < b.hi)) throw ConfigError("domain interval must satisfy lo < hi");
    }
  }

  static Domain interval(double lo, double hi) { return Domain({{lo, hi}}); }

  int dim() const { return static_cast<int>(bounds_.size()); }

  const Interval& bound(int i) const { return bounds_[static_cast<std::size_t>(i)]; }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      if (x[i] < bounds_[i].lo || x[i] > bounds_[i].hi) return false;
    }
    return true;
  }

  bool contains1d(double x) const { return x >= bounds_[0].lo && x <= bounds_[0].hi; }

  double volume() const {
    double v = 1.0;
    for (const auto& b : bounds_) v *= (b.hi - b.lo);
    return v;
  }

 private:
  std::vector<Interval> bounds_;
};

// Uniform evaluation grid over a 1-d domain, n >= 2 points including both ends.
inline std::vector<double> uniform_grid(const Domain& domain, int n) {
  if (domain.dim() != 1) throw ConfigError("uniform_grid requires a 1-d domain");
  if (n < 2) throw ConfigError("uniform_grid needs at least 2 points");
  const double lo = domain.bound(0).lo;
  const double hi = domain.bound(0).hi;
  std::vector<double> g(static_cast<std::size_t>(n));
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + dx * i;
  g.back() = hi;
  return g;
}

}  // namespace splitfilter
