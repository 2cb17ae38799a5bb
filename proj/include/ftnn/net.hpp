#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ftnn/error.hpp"
#include "ftnn/loss.hpp"
#include "ftnn/matrix.hpp"

namespace ftnn {

/// Pre-activations are clamped to this magnitude before any exponential.
inline constexpr double kPreActivationClamp = 30.0;

inline double clamp_preactivation(double a) {
  return std::clamp(a, -kPreActivationClamp, kPreActivationClamp);
}

enum class Activation { Sigmoid, Identity };

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-clamp_preactivation(a))); }

inline double sigmoid_prime(double a) {
  const double s = sigmoid(a);
  return s * (1.0 - s);
}

inline double activate(Activation act, double a) {
  return act == Activation::Sigmoid ? sigmoid(a) : a;
}

inline double activate_prime(Activation act, double a) {
  return act == Activation::Sigmoid ? sigmoid_prime(a) : 1.0;
}

/// Fully connected feed-forward network. Hidden layers are sigmoid, the
/// output layer is sigmoid or identity. The bias of every unit lives in the
/// last column of its layer's weight matrix and multiplies a constant 1.
class Mlp {
 public:
  Mlp(std::vector<std::size_t> layer_sizes, Activation output = Activation::Sigmoid)
      : sizes_(std::move(layer_sizes)), output_(output) {
    if (sizes_.size() < 2) throw ShapeError("an MLP needs at least an input and an output layer");
    for (auto s : sizes_)
      if (s == 0) throw ShapeError("layer sizes must be positive");
    weights_.reserve(sizes_.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
      weights_.emplace_back(sizes_[l + 1], sizes_[l] + 1);
  }

  /// Weights drawn uniformly from [-scale, scale] with a seeded generator.
  static Mlp random(std::vector<std::size_t> layer_sizes, Activation output, std::uint64_t seed,
                    double scale = 0.5) {
    Mlp net(std::move(layer_sizes), output);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& m : net.weights_)
      for (double& w : m.values()) w = dist(gen);
    return net;
  }

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t layer_count() const noexcept { return weights_.size(); }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  Activation output_activation() const noexcept { return output_; }

  Activation activation(std::size_t layer) const noexcept {
    return layer + 1 == weights_.size() ? output_ : Activation::Sigmoid;
  }

  /// One sigmoid unit fed directly by the inputs.
  bool is_single_neuron() const noexcept {
    return sizes_.size() == 2 && sizes_[1] == 1 && output_ == Activation::Sigmoid;
  }

  const WeightSet& weights() const noexcept { return weights_; }
  WeightSet& weights() noexcept { return weights_; }
  const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
  Matrix& weights(std::size_t layer) { return weights_.at(layer); }

  void set_weights(WeightSet ws) {
    require_same_shape(weights_, ws, "Mlp::set_weights");
    weights_ = std::move(ws);
  }

  bool finite() const { return all_finite(weights_); }

 private:
  std::vector<std::size_t> sizes_;
  Activation output_;
  WeightSet weights_;
};

/// Everything a forward pass produces for one input.
///
/// `z[l]` is the input of weight layer l with the constant bias entry 1
/// appended (z[0] is x followed by 1). `a[l]` are the pre-activations that
/// weight layer l produces, and `y` the network output.
struct ForwardTrace {
  std::vector<double> x;
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
  std::vector<double> y;
};

/// Per weight layer, dE/da for each non-bias unit that layer produces.
using Deltas = std::vector<std::vector<double>>;

inline ForwardTrace forward(const Mlp& net, std::span<const double> x) {
  if (x.size() != net.input_size())
    throw ShapeError("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(net.input_size()));
  ForwardTrace tr;
  tr.x.assign(x.begin(), x.end());
  const std::size_t layers = net.layer_count();
  tr.z.resize(layers);
  tr.a.resize(layers);
  tr.z[0].assign(x.begin(), x.end());
  tr.z[0].push_back(1.0);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = net.weights(l);
    const auto& in = tr.z[l];
    auto& pre = tr.a[l];
    pre.assign(w.rows(), 0.0);
    for (std::size_t j = 0; j < w.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < w.cols(); ++i) acc += w(j, i) * in[i];
      pre[j] = acc;
    }
    const Activation act = net.activation(l);
    std::vector<double> out(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) out[j] = activate(act, pre[j]);
    if (l + 1 < layers) {
      out.push_back(1.0);
      tr.z[l + 1] = std::move(out);
    } else {
      tr.y = std::move(out);
    }
  }
  return tr;
}

inline std::vector<double> output_error(const ForwardTrace& trace, std::span<const double> y_star) {
  if (y_star.size() != trace.y.size()) throw ShapeError("target length differs from network output");
  std::vector<double> e(trace.y.size());
  for (std::size_t m = 0; m < e.size(); ++m) e[m] = trace.y[m] - y_star[m];
  return e;
}

/// Backward recursion given dE/dy. The bias entry of z never receives a
/// delta and is skipped in the back-sum.
inline Deltas sensitivities(const Mlp& net, const ForwardTrace& trace, std::span<const double> dE_dy) {
  const std::size_t layers = net.layer_count();
  if (trace.a.size() != layers) throw ShapeError("sensitivities: trace does not match network");
  if (dE_dy.size() != net.output_size()) throw ShapeError("sensitivities: error gradient has wrong length");
  Deltas d(layers);
  {
    const auto& a = trace.a.back();
    auto& out = d.back();
    out.resize(a.size());
    const Activation act = net.activation(layers - 1);
    for (std::size_t m = 0; m < a.size(); ++m) out[m] = activate_prime(act, a[m]) * dE_dy[m];
  }
  for (std::size_t l = layers - 1; l-- > 0;) {
    const Matrix& w_next = net.weights(l + 1);
    const auto& a = trace.a[l];
    const auto& next = d[l + 1];
    auto& cur = d[l];
    cur.assign(a.size(), 0.0);
    for (std::size_t j = 0; j < a.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < next.size(); ++k) acc += w_next(k, j) * next[k];
      cur[j] = sigmoid_prime(a[j]) * acc;
    }
  }
  return d;
}

/// Sensitivities for a loss kind, with dE/dy taken from the loss.
inline Deltas sensitivities(const Mlp& net, const ForwardTrace& trace, std::span<const double> y_star,
                            const LossKind& loss) {
  const auto e = output_error(trace, y_star);
  return sensitivities(net, trace, loss_error_grad(e, loss));
}

/// dE/dw_ji = delta_j * z_i, bias column included.
inline WeightSet loss_gradient(const Deltas& deltas, const ForwardTrace& trace) {
  if (deltas.size() != trace.z.size()) throw ShapeError("loss_gradient: deltas and trace disagree");
  WeightSet g;
  g.reserve(deltas.size());
  for (std::size_t l = 0; l < deltas.size(); ++l) {
    const auto& d = deltas[l];
    const auto& z = trace.z[l];
    Matrix m(d.size(), z.size());
    for (std::size_t j = 0; j < d.size(); ++j)
      for (std::size_t i = 0; i < z.size(); ++i) m(j, i) = d[j] * z[i];
    g.push_back(std::move(m));
  }
  return g;
}

}  // namespace ftnn
