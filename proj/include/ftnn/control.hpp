#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <variant>

#include "ftnn/error.hpp"
#include "ftnn/loss.hpp"
#include "ftnn/matrix.hpp"
#include "ftnn/net.hpp"

namespace ftnn {

/// Positive tuning gains, one scalar for every weight or one per weight.
class GainSchedule {
 public:
  static GainSchedule scalar(double k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ContractError("gain must be positive and finite");
    GainSchedule g;
    g.scalar_ = k;
    g.k_min_ = k;
    return g;
  }

  static GainSchedule per_weight(WeightSet gains) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& m : gains)
      for (double k : m.values()) {
        if (!(k > 0.0) || !std::isfinite(k)) throw ContractError("every gain must be positive and finite");
        lo = std::min(lo, k);
      }
    if (!std::isfinite(lo)) throw ContractError("per-weight gain set is empty");
    GainSchedule g;
    g.per_weight_ = std::move(gains);
    g.k_min_ = lo;
    return g;
  }

  bool is_scalar() const noexcept { return per_weight_.empty(); }
  double k_min() const noexcept { return k_min_; }

  double at(std::size_t layer, std::size_t j, std::size_t i) const {
    return is_scalar() ? scalar_ : per_weight_.at(layer)(j, i);
  }

  /// Throws unless the schedule can serve a network with these weight shapes.
  void check_shape(const WeightSet& ws) const {
    if (!is_scalar()) require_same_shape(per_weight_, ws, "GainSchedule");
  }

  GainSchedule scaled(double lambda) const {
    if (!(lambda > 0.0)) throw ContractError("gain scale must be positive");
    if (is_scalar()) return scalar(scalar_ * lambda);
    WeightSet g = per_weight_;
    for (auto& m : g)
      for (double& k : m.values()) k *= lambda;
    return per_weight(std::move(g));
  }

 private:
  GainSchedule() = default;
  double scalar_ = 1.0;
  double k_min_ = 1.0;
  WeightSet per_weight_;
};

/// Weight rates dw/dt, shaped like the network's weights.
struct ControlSignal {
  WeightSet rates;

  double norm() const { return norm2(rates); }
  bool finite() const { return all_finite(rates); }
};

/// e^z (1 + e^-z)^2 written as e^z + 2 + e^-z, i.e. 1 / sigma'(z).
inline double inverse_sigmoid_slope(double z) {
  const double c = clamp_preactivation(z);
  return std::exp(c) + 2.0 + std::exp(-c);
}

inline void require_single_neuron(const Mlp& net) {
  if (!net.is_single_neuron())
    throw ModeError("single-neuron law needs exactly one sigmoid unit fed by the inputs");
}

/// u_i = -k_i sign(x_i) sign(e) (e^z + 2 + e^-z). The bias is not driven by
/// this law, so its rate is zero. The result has shape 1 x (n+1).
inline ControlSignal single_neuron_update(std::span<const double> x, double e_bar, double z,
                                          const GainSchedule& gains) {
  Matrix u(1, x.size() + 1);
  const double s = sign(e_bar);
  if (s != 0.0) {
    const double scale = inverse_sigmoid_slope(z);
    for (std::size_t i = 0; i < x.size(); ++i) u(0, i) = -gains.at(0, 0, i) * sign(x[i]) * s * scale;
  }
  ControlSignal out;
  out.rates.push_back(std::move(u));
  return out;
}

/// dw_ji/dt = -k_ji sgnpow(delta_j z_i, alpha) E^beta, bias columns included.
inline ControlSignal mlp_update(const Deltas& deltas, const ForwardTrace& trace, double E,
                                const GainSchedule& gains, const LyapunovLoss& loss) {
  if (!(E >= 0.0)) throw ContractError("mlp_update: loss value must be non-negative");
  if (deltas.size() != trace.z.size()) throw ShapeError("mlp_update: deltas and trace disagree");
  const double scale = std::pow(E, loss.beta);
  ControlSignal out;
  out.rates.reserve(deltas.size());
  for (std::size_t l = 0; l < deltas.size(); ++l) {
    const auto& d = deltas[l];
    const auto& z = trace.z[l];
    Matrix m(d.size(), z.size());
    if (scale != 0.0) {
      for (std::size_t j = 0; j < d.size(); ++j)
        for (std::size_t i = 0; i < z.size(); ++i)
          m(j, i) = -gains.at(l, j, i) * sgnpow(d[j] * z[i], loss.alpha) * scale;
    }
    out.rates.push_back(std::move(m));
  }
  return out;
}

/// Gradient flow dw/dt = -k dLoss/dw for the L1/L2 baselines.
inline ControlSignal baseline_update(const WeightSet& grad, const GainSchedule& gains) {
  ControlSignal out;
  out.rates = zeros_like(grad);
  for (std::size_t l = 0; l < grad.size(); ++l) {
    const Matrix& g = grad[l];
    Matrix& r = out.rates[l];
    for (std::size_t j = 0; j < g.rows(); ++j)
      for (std::size_t i = 0; i < g.cols(); ++i) r(j, i) = -gains.at(l, j, i) * g(j, i);
  }
  return out;
}

/// -E^beta sum k_ji |delta_j z_i|^(alpha+1): the loss rate the multilayer law
/// produces along the current state.
inline double mlp_decrease_rate(const Deltas& deltas, const ForwardTrace& trace, double E,
                                const GainSchedule& gains, const LyapunovLoss& loss) {
  double acc = 0.0;
  for (std::size_t l = 0; l < deltas.size(); ++l)
    for (std::size_t j = 0; j < deltas[l].size(); ++j)
      for (std::size_t i = 0; i < trace.z[l].size(); ++i)
        acc += gains.at(l, j, i) * std::pow(std::abs(deltas[l][j] * trace.z[l][i]), loss.alpha + 1.0);
  return -std::pow(E, loss.beta) * acc;
}

}  // namespace ftnn
