#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "splitfilter/domain.hpp"
#include "splitfilter/errors.hpp"
#include "splitfilter/rng.hpp"

namespace splitfilter {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Feed-forward net: optional input batch-norm, then [dense -> batch-norm ->
// tanh] per hidden width, then a final dense and (by default) a closing
// batch-norm.
struct NetworkArchitecture {
  int input_dim = 1;
  std::vector<int> hidden_widths = {51, 51};
  int output_dim = 1;
  bool input_batch_norm = true;
  bool final_batch_norm = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.99;
};

enum class LayerKind { batch_norm, dense, tanh_activation };

struct LayerSpec {
  LayerKind kind;
  int in_dim;
  int out_dim;
};

inline std::vector<LayerSpec> layer_stack(const NetworkArchitecture& arch) {
  if (arch.input_dim < 1 || arch.output_dim < 1)
    throw ConfigError("network needs positive input/output dimensions");
  for (int w : arch.hidden_widths)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  std::vector<LayerSpec> stack;
  int cur = arch.input_dim;
  if (arch.input_batch_norm) stack.push_back({LayerKind::batch_norm, cur, cur});
  for (int w : arch.hidden_widths) {
    stack.push_back({LayerKind::dense, cur, w});
    stack.push_back({LayerKind::batch_norm, w, w});
    stack.push_back({LayerKind::tanh_activation, w, w});
    cur = w;
  }
  stack.push_back({LayerKind::dense, cur, arch.output_dim});
  if (arch.final_batch_norm)
    stack.push_back({LayerKind::batch_norm, arch.output_dim, arch.output_dim});
  return stack;
}

struct ParamBlock {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<ParamBlock> blocks;
  int total = 0;

  int add(const std::string& name, int rows, int cols) {
    blocks.push_back({name, total, rows, cols});
    total += rows * cols;
    return total;
  }
  // Name of the block covering flat index i (diagnostics).
  std::string block_of(int i) const {
    for (const auto& b : blocks)
      if (i >= b.offset && i < b.offset + b.size()) return b.name;
    return "<unknown>";
  }
  const ParamBlock& find(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw ConfigError("no parameter block named " + name);
  }
};

struct NetworkParams {
  NetworkArchitecture arch;
  std::vector<LayerSpec> stack;
  Eigen::VectorXd values;   // trainable: dense weights/biases, bn gamma/beta
  Eigen::VectorXd running;  // bn running mean/variance (not optimized)
  ParamLayout layout;
  ParamLayout running_layout;
};

namespace detail {

inline Eigen::Map<RowMat> view(Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.rows, b.cols};
}
inline Eigen::Map<const RowMat> view(const Eigen::VectorXd& v, const ParamBlock& b) {
  return {v.data() + b.offset, b.rows, b.cols};
}

}  // namespace detail

// Builds the parameter container: Glorot-uniform dense weights, zero biases,
// batch-norm gamma = 1, beta = 0, running statistics (0, 1).
inline NetworkParams initialize_network(const NetworkArchitecture& arch,
                                        rng::Stream& stream) {
  NetworkParams p;
  p.arch = arch;
  p.stack = layer_stack(arch);
  int n_dense = 0, n_bn = 0;
  for (const auto& layer : p.stack) {
    if (layer.kind == LayerKind::dense) {
      const std::string tag = "dense" + std::to_string(n_dense++);
      p.layout.add(tag + ".weight", layer.in_dim, layer.out_dim);
      p.layout.add(tag + ".bias", 1, layer.out_dim);
    } else if (layer.kind == LayerKind::batch_norm) {
      const std::string tag = "bn" + std::to_string(n_bn++);
      p.layout.add(tag + ".gamma", 1, layer.out_dim);
      p.layout.add(tag + ".beta", 1, layer.out_dim);
      p.running_layout.add(tag + ".running_mean", 1, layer.out_dim);
      p.running_layout.add(tag + ".running_var", 1, layer.out_dim);
    }
  }
  p.values = Eigen::VectorXd::Zero(p.layout.total);
  p.running = Eigen::VectorXd::Zero(p.running_layout.total);

  n_dense = 0;
  n_bn = 0;
  for (const auto& layer : p.stack) {
    if (layer.kind == LayerKind::dense) {
      const std::string tag = "dense" + std::to_string(n_dense++);
      auto w = detail::view(p.values, p.layout.find(tag + ".weight"));
      const double bound = std::sqrt(6.0 / (layer.in_dim + layer.out_dim));
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) w(r, c) = stream.uniform(-bound, bound);
    } else if (layer.kind == LayerKind::batch_norm) {
      const std::string tag = "bn" + std::to_string(n_bn++);
      detail::view(p.values, p.layout.find(tag + ".gamma")).setOnes();
      detail::view(p.running, p.running_layout.find(tag + ".running_var")).setOnes();
    }
  }
  return p;
}

enum class Mode { train, inference };

struct LayerCache {
  Eigen::MatrixXd input;  // batch x in_dim
  // batch-norm internals (train mode)
  Eigen::RowVectorXd mean, inv_std;
  Eigen::MatrixXd xhat;
  // tanh output
  Eigen::MatrixXd output;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd output;
  bool train = false;
};

// Runs the stack on a (batch x input_dim) matrix. Train mode normalizes with
// batch statistics and, unless update_running is false, folds them into the
// running averages; inference mode uses the stored running statistics and is
// pointwise in the batch.
inline Eigen::MatrixXd forward(NetworkParams& p, const Eigen::MatrixXd& inputs,
                               Mode mode, ForwardCache* cache = nullptr,
                               bool update_running = true) {
  if (inputs.cols() != p.arch.input_dim)
    throw ConfigError("forward: input dimension mismatch");
  if (!inputs.allFinite()) throw NumericalError("forward: non-finite input");
  if (mode == Mode::train && inputs.rows() < 2)
    throw ConfigError("forward: train mode needs batch size >= 2");

  if (cache) {
    cache->layers.assign(p.stack.size(), {});
    cache->train = (mode == Mode::train);
  }

  const double eps = p.arch.bn_epsilon;
  const double momentum = p.arch.bn_momentum;
  Eigen::MatrixXd x = inputs;
  int n_dense = 0, n_bn = 0;
  for (std::size_t li = 0; li < p.stack.size(); ++li) {
    const auto& layer = p.stack[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    switch (layer.kind) {
      case LayerKind::dense: {
        const std::string tag = "dense" + std::to_string(n_dense++);
        auto w = detail::view(p.values, p.layout.find(tag + ".weight"));
        auto b = detail::view(p.values, p.layout.find(tag + ".bias"));
        if (lc) lc->input = x;
        x = (x * w).rowwise() + b.row(0);
        break;
      }
      case LayerKind::batch_norm: {
        const std::string tag = "bn" + std::to_string(n_bn++);
        auto gamma = detail::view(p.values, p.layout.find(tag + ".gamma"));
        auto beta = detail::view(p.values, p.layout.find(tag + ".beta"));
        auto rmean = detail::view(p.running, p.running_layout.find(tag + ".running_mean"));
        auto rvar = detail::view(p.running, p.running_layout.find(tag + ".running_var"));
        if (mode == Mode::train) {
          const double n = static_cast<double>(x.rows());
          Eigen::RowVectorXd mean = x.colwise().sum() / n;
          Eigen::MatrixXd centered = x.rowwise() - mean;
          Eigen::RowVectorXd var = (centered.array().square().colwise().sum() / n).matrix();
          Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt().matrix();
          Eigen::MatrixXd xhat = (centered.array().rowwise() * inv_std.array()).matrix();
          if (update_running) {
            rmean.row(0) = momentum * rmean.row(0) + (1.0 - momentum) * mean;
            rvar.row(0) = momentum * rvar.row(0) + (1.0 - momentum) * var;
          }
          if (lc) {
            lc->input = x;
            lc->mean = mean;
            lc->inv_std = inv_std;
            lc->xhat = xhat;
          }
          Eigen::RowVectorXd gam = gamma.row(0), bet = beta.row(0);
          x = ((xhat.array().rowwise() * gam.array()).rowwise() + bet.array()).matrix();
        } else {
          Eigen::RowVectorXd inv_std = (rvar.row(0).array() + eps).rsqrt().matrix();
          Eigen::RowVectorXd gam = gamma.row(0), bet = beta.row(0);
          Eigen::RowVectorXd rm = rmean.row(0);
          x = ((((x.rowwise() - rm).array().rowwise() * inv_std.array()).rowwise() *
                gam.array())
                   .rowwise() +
               bet.array())
                  .matrix();
        }
        break;
      }
      case LayerKind::tanh_activation: {
        x = x.array().tanh().matrix();
        if (lc) lc->output = x;
        break;
      }
    }
  }
  if (cache) cache->output = x;
  return x;
}

inline Eigen::MatrixXd forward_inference(const NetworkParams& p,
                                         const Eigen::MatrixXd& inputs) {
  // Inference never mutates; cast is confined here.
  auto& mutable_p = const_cast<NetworkParams&>(p);
  return forward(mutable_p, inputs, Mode::inference, nullptr, false);
}

// Reverse-mode gradients of the batch through the cached train-mode forward.
// grad_output is dLoss/dOutput (batch x output_dim); the result is a flat
// vector matching params.values, including the batch-statistic coupling of
// every batch-norm layer.
inline Eigen::VectorXd backward(const NetworkParams& p, const ForwardCache& cache,
                                const Eigen::MatrixXd& grad_output) {
  if (!cache.train) throw ConfigError("backward needs a train-mode forward cache");
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(p.layout.total);
  Eigen::MatrixXd g = grad_output;

  int n_dense = 0, n_bn = 0;
  for (const auto& layer : p.stack) {
    if (layer.kind == LayerKind::dense) ++n_dense;
    else if (layer.kind == LayerKind::batch_norm) ++n_bn;
  }

  for (std::size_t li = p.stack.size(); li-- > 0;) {
    const auto& layer = p.stack[li];
    const LayerCache& lc = cache.layers[li];
    switch (layer.kind) {
      case LayerKind::dense: {
        const std::string tag = "dense" + std::to_string(--n_dense);
        auto w = detail::view(p.values, p.layout.find(tag + ".weight"));
        auto dw = detail::view(grads, p.layout.find(tag + ".weight"));
        auto db = detail::view(grads, p.layout.find(tag + ".bias"));
        dw = lc.input.transpose() * g;
        db.row(0) = g.colwise().sum();
        g = g * w.transpose();
        break;
      }
      case LayerKind::batch_norm: {
        const std::string tag = "bn" + std::to_string(--n_bn);
        auto gamma = detail::view(p.values, p.layout.find(tag + ".gamma"));
        auto dgamma = detail::view(grads, p.layout.find(tag + ".gamma"));
        auto dbeta = detail::view(grads, p.layout.find(tag + ".beta"));
        const double n = static_cast<double>(g.rows());
        dgamma.row(0) = (g.array() * lc.xhat.array()).colwise().sum().matrix();
        dbeta.row(0) = g.colwise().sum();
        Eigen::RowVectorXd gam = gamma.row(0);
        Eigen::MatrixXd dxhat = (g.array().rowwise() * gam.array()).matrix();
        Eigen::RowVectorXd mean_dxhat = dxhat.colwise().sum() / n;
        Eigen::RowVectorXd mean_dxhat_xhat =
            ((dxhat.array() * lc.xhat.array()).colwise().sum() / n).matrix();
        g = (((dxhat.rowwise() - mean_dxhat).array() -
              lc.xhat.array().rowwise() * mean_dxhat_xhat.array())
                 .rowwise() *
             lc.inv_std.array())
                .matrix();
        break;
      }
      case LayerKind::tanh_activation: {
        g = g.array() * (1.0 - lc.output.array().square());
        break;
      }
    }
  }
  return grads;
}

namespace detail {

inline void write_bytes(std::FILE* f, const void* p, std::size_t n) {
  if (std::fwrite(p, 1, n, f) != n) throw NumericalError("checkpoint write failed");
}
inline void read_bytes(std::FILE* f, void* p, std::size_t n) {
  if (std::fread(p, 1, n, f) != n) throw NumericalError("checkpoint read failed");
}
inline void write_i32(std::FILE* f, std::int32_t v) { write_bytes(f, &v, 4); }
inline void write_f64(std::FILE* f, double v) { write_bytes(f, &v, 8); }
inline std::int32_t read_i32(std::FILE* f) {
  std::int32_t v;
  read_bytes(f, &v, 4);
  return v;
}
inline double read_f64(std::FILE* f) {
  double v;
  read_bytes(f, &v, 8);
  return v;
}

}  // namespace detail

// Prior-density estimate: the network restricted to its hypercube support.
// Raw network values are returned inside the domain (no clamping); points
// outside evaluate to exactly zero.
struct NeuralDensity {
  NetworkParams net;
  Domain domain;

  double evaluate(std::span<const double> x) const {
    if (!domain.contains(x)) return 0.0;
    Eigen::MatrixXd input(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
      input(0, static_cast<Eigen::Index>(i)) = x[i];
    return forward_inference(net, input)(0, 0);
  }

  double evaluate1d(double x) const { return evaluate(std::span<const double>(&x, 1)); }

  // Batched inference over 1-d points; out-of-domain entries are zeroed.
  Eigen::VectorXd evaluate_grid(std::span<const double> xs) const {
    Eigen::MatrixXd input(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i)
      input(static_cast<Eigen::Index>(i), 0) = xs[i];
    Eigen::VectorXd out = forward_inference(net, input).col(0);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!domain.contains1d(xs[i])) out(static_cast<Eigen::Index>(i)) = 0.0;
    return out;
  }
};

// Checkpoint layout (native little-endian):
//   magic "SFNETv1\0"
//   i32 input_dim, i32 n_hidden, i32 widths..., i32 output_dim,
//   i32 flags (bit0 input_bn, bit1 final_bn), f64 bn_epsilon, f64 bn_momentum,
//   i32 domain_dim, f64 lo/hi per dimension,
//   i32 n_values, f64 values... (row-major per block),
//   i32 n_running, f64 running...
inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'N', 'E', 'T', 'v', '1', '\0'};

inline void save_density(const NeuralDensity& nd, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
  const auto& arch = nd.net.arch;
  detail::write_bytes(f, kCheckpointMagic, 8);
  detail::write_i32(f, arch.input_dim);
  detail::write_i32(f, static_cast<std::int32_t>(arch.hidden_widths.size()));
  for (int w : arch.hidden_widths) detail::write_i32(f, w);
  detail::write_i32(f, arch.output_dim);
  detail::write_i32(f, (arch.input_batch_norm ? 1 : 0) | (arch.final_batch_norm ? 2 : 0));
  detail::write_f64(f, arch.bn_epsilon);
  detail::write_f64(f, arch.bn_momentum);
  detail::write_i32(f, nd.domain.dim());
  for (int i = 0; i < nd.domain.dim(); ++i) {
    detail::write_f64(f, nd.domain.bound(i).lo);
    detail::write_f64(f, nd.domain.bound(i).hi);
  }
  detail::write_i32(f, static_cast<std::int32_t>(nd.net.values.size()));
  detail::write_bytes(f, nd.net.values.data(), sizeof(double) * static_cast<std::size_t>(nd.net.values.size()));
  detail::write_i32(f, static_cast<std::int32_t>(nd.net.running.size()));
  detail::write_bytes(f, nd.net.running.data(), sizeof(double) * static_cast<std::size_t>(nd.net.running.size()));
  std::fclose(f);
}

inline NeuralDensity load_density(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  detail::read_bytes(f, magic, 8);
  for (int i = 0; i < 8; ++i)
    if (magic[i] != kCheckpointMagic[i]) {
      std::fclose(f);
      throw ConfigError("bad checkpoint magic in " + path);
    }
  NetworkArchitecture arch;
  arch.input_dim = detail::read_i32(f);
  const int n_hidden = detail::read_i32(f);
  arch.hidden_widths.resize(static_cast<std::size_t>(n_hidden));
  for (int i = 0; i < n_hidden; ++i) arch.hidden_widths[static_cast<std::size_t>(i)] = detail::read_i32(f);
  arch.output_dim = detail::read_i32(f);
  const int flags = detail::read_i32(f);
  arch.input_batch_norm = (flags & 1) != 0;
  arch.final_batch_norm = (flags & 2) != 0;
  arch.bn_epsilon = detail::read_f64(f);
  arch.bn_momentum = detail::read_f64(f);
  const int ddim = detail::read_i32(f);
  std::vector<Interval> bounds(static_cast<std::size_t>(ddim));
  for (auto& b : bounds) {
    b.lo = detail::read_f64(f);
    b.hi = detail::read_f64(f);
  }
  auto stream = rng::Stream(0);
  NeuralDensity nd{initialize_network(arch, stream), Domain(bounds)};
  const int nv = detail::read_i32(f);
  if (nv != nd.net.values.size()) {
    std::fclose(f);
    throw ConfigError("checkpoint parameter count mismatch in " + path);
  }
  detail::read_bytes(f, nd.net.values.data(), sizeof(double) * static_cast<std::size_t>(nv));
  const int nr = detail::read_i32(f);
  if (nr != nd.net.running.size()) {
    std::fclose(f);
    throw ConfigError("checkpoint running-stat count mismatch in " + path);
  }
  detail::read_bytes(f, nd.net.running.data(), sizeof(double) * static_cast<std::size_t>(nr));
  std::fclose(f);
  return nd;
}

}  // namespace splitfilter
