#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ftnn/error.hpp"

namespace ftnn {

/// sign(v) * |v|^p, with sgnpow(0, p) = 0 for every p >= 0.
inline double sgnpow(double v, double p) {
  if (v == 0.0) return 0.0;
  if (p == 0.0) return v > 0.0 ? 1.0 : -1.0;
  if (p == 1.0) return v;
  const double mag = std::pow(std::abs(v), p);
  return v > 0.0 ? mag : -mag;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

enum class AlphaPolicy {
  Strict,     ///< alpha must lie in (0, 1]
  AllowZero,  ///< additionally admit alpha == 0 (discontinuous law, unstable)
};

/// Exponents of the power-law loss  E = sum |e_m|^(alpha+1) / (alpha+1).
///
/// `alpha` shapes the loss, `beta` the multiplier E^beta of the multilayer
/// update law. alpha == 1 is the quadratic reference case and is accepted
/// for evaluation; training laws require alpha < 1 where it matters.
struct LyapunovLoss {
  double alpha = 0.7;
  double beta = 0.7 / 1.7;

  /// beta tied to alpha as alpha/(alpha+1).
  static LyapunovLoss single_neuron(double alpha, AlphaPolicy policy = AlphaPolicy::Strict) {
    check_alpha(alpha, policy);
    return {alpha, alpha / (alpha + 1.0)};
  }

  /// Requires alpha + beta < 1. When beta is not given it defaults to
  /// min(alpha/(alpha+1), 0.999 * (1 - alpha)).
  static LyapunovLoss multilayer(double alpha, std::optional<double> beta = std::nullopt,
                                 AlphaPolicy policy = AlphaPolicy::Strict) {
    check_alpha(alpha, policy);
    const double b = beta.value_or(default_multilayer_beta(alpha));
    if (!(b > 0.0 && b < 1.0)) throw ContractError("beta must lie in (0, 1)");
    if (!(alpha + b < 1.0)) throw ContractError("multilayer law requires alpha + beta < 1");
    return {alpha, b};
  }

  static double default_multilayer_beta(double alpha) {
    const double b = std::min(alpha / (alpha + 1.0), 0.999 * (1.0 - alpha));
    return b > 0.0 ? b : 0.5 * (1.0 - alpha);  // alpha == 0
  }

  static void check_alpha(double alpha, AlphaPolicy policy) {
    if (!std::isfinite(alpha)) throw ContractError("alpha must be finite");
    if (alpha == 0.0) {
      if (policy == AlphaPolicy::AllowZero) return;
      throw ContractError("alpha = 0 makes the update law discontinuous; pass --unsafe-alpha to allow it");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("alpha must lie in (0, 1]");
  }
};

struct L1Loss {};
struct L2Loss {};

using LossKind = std::variant<LyapunovLoss, L1Loss, L2Loss>;

inline std::string_view loss_name(const LossKind& kind) {
  if (std::holds_alternative<LyapunovLoss>(kind)) return "lyapunov";
  if (std::holds_alternative<L1Loss>(kind)) return "l1";
  return "l2";
}

inline bool is_lyapunov(const LossKind& kind) { return std::holds_alternative<LyapunovLoss>(kind); }

/// E = sum_m |e_m|^(alpha+1) / (alpha+1)
inline double lyap_eval(std::span<const double> e_bar, const LyapunovLoss& loss) {
  const double p = loss.alpha + 1.0;
  double acc = 0.0;
  for (double e : e_bar) acc += std::pow(std::abs(e), p);
  return acc / p;
}

/// dE/de_m = sgnpow(e_m, alpha)
inline std::vector<double> lyap_error_grad(std::span<const double> e_bar, const LyapunovLoss& loss) {
  std::vector<double> g(e_bar.size());
  for (std::size_t m = 0; m < e_bar.size(); ++m) g[m] = sgnpow(e_bar[m], loss.alpha);
  return g;
}

/// L1 = sum |e|, L2 = 0.5 * sum e^2.
inline double baseline_eval(std::span<const double> e_bar, const LossKind& kind) {
  double acc = 0.0;
  if (std::holds_alternative<L1Loss>(kind)) {
    for (double e : e_bar) acc += std::abs(e);
  } else if (std::holds_alternative<L2Loss>(kind)) {
    for (double e : e_bar) acc += e * e;
    acc *= 0.5;
  } else {
    throw ContractError("baseline_eval expects an L1 or L2 loss kind");
  }
  return acc;
}

inline std::vector<double> baseline_grad(std::span<const double> e_bar, const LossKind& kind) {
  std::vector<double> g(e_bar.begin(), e_bar.end());
  if (std::holds_alternative<L1Loss>(kind)) {
    for (double& e : g) e = sign(e);
  } else if (!std::holds_alternative<L2Loss>(kind)) {
    throw ContractError("baseline_grad expects an L1 or L2 loss kind");
  }
  return g;
}

inline double loss_eval(std::span<const double> e_bar, const LossKind& kind) {
  if (const auto* lyap = std::get_if<LyapunovLoss>(&kind)) return lyap_eval(e_bar, *lyap);
  return baseline_eval(e_bar, kind);
}

inline std::vector<double> loss_error_grad(std::span<const double> e_bar, const LossKind& kind) {
  if (const auto* lyap = std::get_if<LyapunovLoss>(&kind)) return lyap_error_grad(e_bar, *lyap);
  return baseline_grad(e_bar, kind);
}

}  // namespace ftnn
