#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "splitfilter/errors.hpp"

namespace splitfilter {

using VectorFieldFn = std::function<void(std::span<const double>, std::span<double>)>;
using MatrixFieldFn = std::function<void(std::span<const double>, std::span<double>)>;
using ScalarFieldFn = std::function<double(std::span<const double>)>;

// Coefficient bundle of one filtering problem. The signal follows
//   dX = f(X) dt + sigma(X) dV,      a = (1/2) sigma sigma^T,
// the observation increment has sensor h, and the splitting representation
// needs the auxiliary drift b = 2 vecdiv(a) - f and the zero-order potential
// r = div(vecdiv(a) - f). b and r are supplied in closed form per family.
struct FilterModel {
  int dim_signal = 1;   // d
  int dim_obs = 1;      // m
  int dim_noise = 1;    // p

  VectorFieldFn drift;       // f : R^d -> R^d
  MatrixFieldFn dispersion;  // sigma : R^d -> R^{d x p}, row-major
  MatrixFieldFn diffusion;   // a : R^d -> R^{d x d}, row-major
  VectorFieldFn sensor;      // h : R^d -> R^m
  VectorFieldFn aux_drift;   // b : R^d -> R^d
  ScalarFieldFn potential;   // r : R^d -> R

  // Set when sigma does not depend on x; samplers then skip re-evaluation.
  bool constant_dispersion = false;
  std::vector<double> dispersion_value;  // d x p, row-major, valid when constant
};

struct LinearModelParams {
  // f(x) = M x + eta, sigma = Sigma (constant), h(x) = H x + gamma.
  int dim_signal = 1;
  int dim_obs = 1;
  int dim_noise = 1;
  std::vector<double> M;      // d x d row-major
  std::vector<double> eta;    // d
  std::vector<double> Sigma;  // d x p row-major
  std::vector<double> H;      // m x d row-major
  std::vector<double> gamma;  // m

  static LinearModelParams scalar(double M, double eta, double Sigma, double H,
                                  double gamma) {
    return LinearModelParams{1, 1, 1, {M}, {eta}, {Sigma}, {H}, {gamma}};
  }

  double trace_M() const {
    double t = 0.0;
    for (int i = 0; i < dim_signal; ++i)
      t += M[static_cast<std::size_t>(i * dim_signal + i)];
    return t;
  }
};

struct BenesModelParams {
  // d = m = 1: f(x) = alpha*sigma*tanh(beta + alpha*x/sigma), h(x) = h1*x + h2.
  double alpha = 0.0;
  double beta = 0.0;
  double sigma = 1.0;
  double h1 = 1.0;
  double h2 = 0.0;
};

namespace detail {

inline void check_linear_dims(const LinearModelParams& p) {
  const auto d = static_cast<std::size_t>(p.dim_signal);
  const auto m = static_cast<std::size_t>(p.dim_obs);
  const auto q = static_cast<std::size_t>(p.dim_noise);
  if (p.dim_signal < 1 || p.dim_obs < 1 || p.dim_noise < 1)
    throw ConfigError("linear model dimensions must be positive");
  if (p.M.size() != d * d) throw ConfigError("linear model: M must be d x d");
  if (p.eta.size() != d) throw ConfigError("linear model: eta must have length d");
  if (p.Sigma.size() != d * q) throw ConfigError("linear model: Sigma must be d x p");
  if (p.H.size() != m * d) throw ConfigError("linear model: H must be m x d");
  if (p.gamma.size() != m) throw ConfigError("linear model: gamma must have length m");
}

inline std::vector<double> half_outer(const std::vector<double>& sigma, int d, int p) {
  // a = (1/2) sigma sigma^T
  std::vector<double> a(static_cast<std::size_t>(d * d), 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < p; ++k)
        s += sigma[static_cast<std::size_t>(i * p + k)] *
             sigma[static_cast<std::size_t>(j * p + k)];
      a[static_cast<std::size_t>(i * d + j)] = 0.5 * s;
    }
  return a;
}

}  // namespace detail

inline FilterModel make_linear_model(const LinearModelParams& p) {
  detail::check_linear_dims(p);
  const int d = p.dim_signal, m = p.dim_obs, q = p.dim_noise;
  const auto a_const = detail::half_outer(p.Sigma, d, q);
  const double tr_M = p.trace_M();

  FilterModel model;
  model.dim_signal = d;
  model.dim_obs = m;
  model.dim_noise = q;
  model.constant_dispersion = true;
  model.dispersion_value = p.Sigma;

  model.drift = [p, d](std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < d; ++i) {
      double s = p.eta[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j)
        s += p.M[static_cast<std::size_t>(i * d + j)] * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = s;
    }
  };
  model.dispersion = [sig = p.Sigma](std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < sig.size(); ++i) out[i] = sig[i];
  };
  model.diffusion = [a_const](std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < a_const.size(); ++i) out[i] = a_const[i];
  };
  model.sensor = [p, d, m](std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < m; ++i) {
      double s = p.gamma[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j)
        s += p.H[static_cast<std::size_t>(i * d + j)] * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = s;
    }
  };
  // Constant sigma: vecdiv(a) = 0, so b = -f and r = -div f = -Tr M.
  model.aux_drift = [p, d](std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < d; ++i) {
      double s = p.eta[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j)
        s += p.M[static_cast<std::size_t>(i * d + j)] * x[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = -s;
    }
  };
  model.potential = [tr_M](std::span<const double>) { return -tr_M; };
  return model;
}

inline FilterModel make_benes_model(const BenesModelParams& p) {
  if (p.sigma == 0.0) throw ConfigError("Benes model requires sigma != 0");

  FilterModel model;
  model.dim_signal = 1;
  model.dim_obs = 1;
  model.dim_noise = 1;
  model.constant_dispersion = true;
  model.dispersion_value = {p.sigma};

  const double alpha = p.alpha, beta = p.beta, sigma = p.sigma;
  model.drift = [alpha, beta, sigma](std::span<const double> x, std::span<double> out) {
    out[0] = alpha * sigma * std::tanh(beta + alpha * x[0] / sigma);
  };
  model.dispersion = [sigma](std::span<const double>, std::span<double> out) {
    out[0] = sigma;
  };
  model.diffusion = [sigma](std::span<const double>, std::span<double> out) {
    out[0] = 0.5 * sigma * sigma;
  };
  model.sensor = [h1 = p.h1, h2 = p.h2](std::span<const double> x, std::span<double> out) {
    out[0] = h1 * x[0] + h2;
  };
  model.aux_drift = [alpha, beta, sigma](std::span<const double> x, std::span<double> out) {
    out[0] = -alpha * sigma * std::tanh(beta + alpha * x[0] / sigma);
  };
  model.potential = [alpha, beta, sigma](std::span<const double> x) {
    const double c = std::cosh(beta + alpha * x[0] / sigma);
    return -alpha * alpha / (c * c);
  };
  return model;
}

// Assembles a model from explicit coefficient closures. Intended for test
// models (degenerate diffusions, finite-difference cross-checks); the two
// built-in families cover everything else.
inline FilterModel make_generic_model(int dim_signal, int dim_obs, int dim_noise,
                                      VectorFieldFn drift, MatrixFieldFn dispersion,
                                      VectorFieldFn sensor, VectorFieldFn aux_drift,
                                      ScalarFieldFn potential,
                                      bool constant_dispersion = false,
                                      std::vector<double> dispersion_value = {}) {
  if (dim_signal < 1 || dim_obs < 1 || dim_noise < 1)
    throw ConfigError("model dimensions must be positive");
  FilterModel model;
  model.dim_signal = dim_signal;
  model.dim_obs = dim_obs;
  model.dim_noise = dim_noise;
  model.drift = std::move(drift);
  model.dispersion = std::move(dispersion);
  model.sensor = std::move(sensor);
  model.aux_drift = std::move(aux_drift);
  model.potential = std::move(potential);
  model.constant_dispersion = constant_dispersion;
  model.dispersion_value = std::move(dispersion_value);
  const int d = dim_signal, q = dim_noise;
  model.diffusion = [disp = model.dispersion, d, q](std::span<const double> x,
                                                    std::span<double> out) {
    std::vector<double> s(static_cast<std::size_t>(d * q));
    disp(x, s);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double v = 0.0;
        for (int k = 0; k < q; ++k)
          v += s[static_cast<std::size_t>(i * q + k)] *
               s[static_cast<std::size_t>(j * q + k)];
        out[static_cast<std::size_t>(i * d + j)] = 0.5 * v;
      }
  };
  return model;
}

}  // namespace splitfilter
