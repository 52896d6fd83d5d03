#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitfilter/density.hpp"
#include "splitfilter/diagnostics.hpp"
#include "splitfilter/domain.hpp"
#include "splitfilter/errors.hpp"
#include "splitfilter/model.hpp"
#include "splitfilter/nn.hpp"
#include "splitfilter/optim.hpp"
#include "splitfilter/sde.hpp"

namespace splitfilter {

enum class PenaltySign {
  encourage_positive,  // lambda * mean(max(0, -NN(xi)))
  paper_literal,       // lambda * sum(max(0, +NN(xi)))
};

struct TrainingHyperparams {
  int epochs = 6002;
  int batch_size = 600;
  int substeps = 10;  // J on the fine grid of each interval
  double penalty_lambda = 1.0;
  PenaltySign penalty_sign = PenaltySign::encourage_positive;
  LrSchedule schedule{{0, 2000, 4000}, {1e-2, 1e-3, 1e-4}};
  int checkpoint_interval = 200;  // cadence of the L2-vs-reference curve
  int workers = 1;
};

// Fixed grid-sampled reference the training loop measures itself against.
struct TrainingReference {
  std::vector<double> points;
  std::vector<double> values;
};

struct TrainingReport {
  std::vector<double> losses;           // one per epoch
  std::vector<double> learning_rates;   // one per epoch
  std::vector<std::pair<int, double>> l2_checkpoints;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct BatchLoss {
  double value = 0.0;    // mse + lambda * penalty
  double mse = 0.0;
  double penalty = 0.0;
  Eigen::VectorXd gradients;
};

// Feynman-Kac regression loss over one path batch:
//   (1/N_b) sum_i |psi(X_T^i) exp(-sum_j k(X_{tau_j}^i) dtau) - NN(xi^i)|^2
// plus the positivity penalty. Targets are constants w.r.t. the parameters.
inline BatchLoss batch_loss(NetworkParams& params, const PathBatch& batch,
                            const BatchDensityFn& psi, double lambda,
                            PenaltySign penalty_sign = PenaltySign::encourage_positive,
                            bool update_running = true) {
  const int nb = batch.n_paths;
  const int d = batch.dim;
  Eigen::MatrixXd starts(nb, d), terminals(nb, d);
  for (int i = 0; i < nb; ++i) {
    const auto s = batch.start(i);
    const auto e = batch.terminal(i);
    for (int c = 0; c < d; ++c) {
      starts(i, c) = s[static_cast<std::size_t>(c)];
      terminals(i, c) = e[static_cast<std::size_t>(c)];
    }
  }
  Eigen::VectorXd targets = psi(terminals);
  for (int i = 0; i < nb; ++i) {
    targets(i) *= std::exp(-batch.potential_integrals[static_cast<std::size_t>(i)]);
    if (!std::isfinite(targets(i)))
      throw NumericalError("batch_loss: non-finite target at sample " + std::to_string(i));
  }

  ForwardCache cache;
  Eigen::VectorXd outputs = forward(params, starts, Mode::train, &cache, update_running).col(0);

  Eigen::VectorXd residual = outputs - targets;
  BatchLoss result;
  result.mse = residual.squaredNorm() / nb;

  Eigen::VectorXd grad_out = (2.0 / nb) * residual;
  if (lambda != 0.0) {
    if (penalty_sign == PenaltySign::encourage_positive) {
      for (int i = 0; i < nb; ++i) {
        if (outputs(i) < 0.0) {
          result.penalty += -outputs(i) / nb;
          grad_out(i) += -lambda / nb;
        }
      }
    } else {  // printed formula: penalize positive outputs, unnormalized
      for (int i = 0; i < nb; ++i) {
        if (outputs(i) > 0.0) {
          result.penalty += outputs(i);
          grad_out(i) += lambda;
        }
      }
    }
  }
  result.value = result.mse + lambda * result.penalty;
  result.gradients = backward(params, cache, grad_out);
  return result;
}

// Algorithm-2 style loop for one observation interval: a fresh batch of
// auxiliary paths every epoch, ADAM with the scheduled rate. Returns the
// trained prior restricted to the domain.
inline std::pair<NeuralDensity, TrainingReport> train_network(
    const FilterModel& model, const Domain& domain, double t_start, double t_end,
    const BatchDensityFn& psi, const NetworkArchitecture& arch,
    const TrainingHyperparams& hp, std::uint64_t root_seed, std::uint64_t step_index,
    const TrainingReference* reference = nullptr) {
  hp.schedule.validate();
  if (hp.epochs < 1 || hp.batch_size < 2)
    throw ConfigError("train_network needs epochs >= 1 and batch_size >= 2");

  const auto t_begin = std::chrono::steady_clock::now();
  auto init_stream = rng::substream(root_seed, rng::Purpose::network_init, step_index);
  NetworkParams params = initialize_network(arch, init_stream);
  AdamState adam = AdamState::create(params.values.size());

  TrainingReport report;
  report.seed = root_seed;
  report.losses.reserve(static_cast<std::size_t>(hp.epochs));
  report.learning_rates.reserve(static_cast<std::size_t>(hp.epochs));

  NeuralDensity density{params, domain};
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    // Path substreams are keyed by (step, epoch) so every epoch sees fresh,
    // reproducible samples.
    const std::uint64_t stream_key = step_index * 0x10000000ull + static_cast<std::uint64_t>(epoch);
    PathBatch batch = sample_auxiliary_batch(model, domain, t_start, t_end, hp.substeps,
                                             hp.batch_size, root_seed, stream_key,
                                             hp.workers);
    BatchLoss loss;
    try {
      loss = batch_loss(params, batch, psi, hp.penalty_lambda, hp.penalty_sign);
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(loss.value))
      throw NumericalError("train_network: non-finite loss at epoch " +
                           std::to_string(epoch));
    const double lr = lr_at(hp.schedule, epoch);
    adam_step(adam, params.values, loss.gradients, lr, &params.layout);
    report.losses.push_back(loss.value);
    report.learning_rates.push_back(lr);

    if (reference && hp.checkpoint_interval > 0 &&
        (epoch % hp.checkpoint_interval == 0 || epoch == hp.epochs)) {
      density.net = params;
      const Eigen::VectorXd nn_values = density.evaluate_grid(reference->points);
      const double spacing = reference->points[1] - reference->points[0];
      report.l2_checkpoints.emplace_back(
          epoch, l2_grid_error({nn_values.data(), static_cast<std::size_t>(nn_values.size())},
                               reference->values, spacing));
    }
  }
  density.net = std::move(params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return {std::move(density), std::move(report)};
}

}  // namespace splitfilter
