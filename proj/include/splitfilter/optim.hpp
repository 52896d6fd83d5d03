#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "splitfilter/errors.hpp"
#include "splitfilter/nn.hpp"

namespace splitfilter {

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState create(Eigen::Index n_params, double beta1 = 0.9,
                          double beta2 = 0.999, double epsilon = 1e-8) {
    AdamState s;
    s.first_moment = Eigen::VectorXd::Zero(n_params);
    s.second_moment = Eigen::VectorXd::Zero(n_params);
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
  }
};

// One bias-corrected ADAM update, in place. layout (optional) is used only to
// name the offending block if a gradient is non-finite.
inline void adam_step(AdamState& state, Eigen::VectorXd& params,
                      const Eigen::VectorXd& grads, double lr,
                      const ParamLayout* layout = nullptr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ConfigError("adam_step: shape mismatch");
  if (!grads.allFinite()) {
    for (Eigen::Index i = 0; i < grads.size(); ++i)
      if (!std::isfinite(grads(i))) {
        const std::string where =
            layout ? layout->block_of(static_cast<int>(i)) : std::to_string(i);
        throw NumericalError("adam_step: non-finite gradient in " + where);
      }
  }
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -=
      lr * (state.first_moment.array() / corr1) /
      ((state.second_moment.array() / corr2).sqrt() + state.epsilon);
}

// Piecewise-constant learning rate kappa(n) = sum_i kappa_i 1_[K_i, K_{i+1})(n)
// with cutoffs K_0 = 0 < K_1 < ... < K_M (half-open intervals, K_{M+1} = inf).
struct LrSchedule {
  std::vector<long> cutoffs = {0};
  std::vector<double> rates = {1e-3};

  void validate() const {
    if (cutoffs.empty() || cutoffs.size() != rates.size())
      throw ConfigError("lr schedule: cutoffs and rates must be parallel, nonempty");
    if (cutoffs.front() != 0) throw ConfigError("lr schedule: first cutoff must be 0");
    for (std::size_t i = 1; i < cutoffs.size(); ++i)
      if (cutoffs[i] <= cutoffs[i - 1])
        throw ConfigError("lr schedule: cutoffs must be strictly increasing");
    for (double r : rates)
      if (!(r > 0)) throw ConfigError("lr schedule: rates must be positive");
  }
};

inline double lr_at(const LrSchedule& schedule, long epoch) {
  double rate = schedule.rates.front();
  for (std::size_t i = 0; i < schedule.cutoffs.size(); ++i) {
    if (epoch >= schedule.cutoffs[i]) rate = schedule.rates[i];
    else break;
  }
  return rate;
}

}  // namespace splitfilter
