#pragma once
// Fixed problems shared by the acceptance binary and the unit tests.

#include <cmath>
#include <vector>

#include "ftnn/bounds.hpp"
#include "ftnn/dynamics.hpp"
#include "ftnn/net.hpp"

namespace problems {

inline constexpr std::uint64_t kSeed = 1;

/// Single sigmoid neuron, four inputs, one fixed sample.
struct SingleNeuron {
  ftnn::Mlp net = ftnn::Mlp::random({4, 1}, ftnn::Activation::Sigmoid, kSeed, 0.5);
  ftnn::Sample sample{{0.9, -0.6, 0.35, 0.3}, {0.2}};
  double k = 1.0;
  double alpha = 0.7;

  double beta() const { return alpha / (alpha + 1.0); }
  double c() const {
    double s = 0.0;
    for (double v : sample.x) s += k * std::abs(v);
    return s;
  }
  double E0(double a) const {
    auto e = ftnn::output_error(ftnn::forward(net, sample.x), sample.y);
    return std::pow(std::abs(e[0]), a + 1.0) / (a + 1.0);
  }
  double E0() const { return E0(alpha); }
  /// Settling time of the closed form with c = sum k|x_i|.
  double T_star() const { return ftnn::settling_time(E0(), c(), beta()); }
};

/// Closed-form solution of dE/dt = -c E^beta.
inline double closed_form(double E0, double c, double beta, double t) {
  const double base = std::pow(E0, 1.0 - beta) - c * (1.0 - beta) * t;
  return base <= 0.0 ? 0.0 : std::pow(base, 1.0 / (1.0 - beta));
}

/// Single neuron with one small input so vanishing perturbations can flip
/// its sign.
struct PerturbedNeuron {
  ftnn::Mlp net = ftnn::Mlp::random({4, 1}, ftnn::Activation::Sigmoid, kSeed, 0.5);
  ftnn::Sample sample{{0.9, -0.6, 0.05, 0.3}, {0.2}};
  double k = 1.0;
  double alpha = 0.7;
  double M = 0.5;
};

/// 4-8-1 network on a seeded sample.
struct Mlp481 {
  ftnn::Mlp net = ftnn::Mlp::random({4, 8, 1}, ftnn::Activation::Sigmoid, kSeed, 0.5);
  ftnn::Sample sample{{0.4, -0.7, 0.25, 0.9}, {0.85}};
  double k = 1.0;
  double alpha = 0.7;
};

}  // namespace problems
