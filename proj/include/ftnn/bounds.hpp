#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ftnn/control.hpp"
#include "ftnn/dynamics.hpp"
#include "ftnn/error.hpp"
#include "ftnn/format.hpp"
#include "ftnn/loss.hpp"

namespace ftnn {

enum class BoundFlavor { SingleNeuron, Mlp, Perturbed };

inline const char* to_string(BoundFlavor f) {
  switch (f) {
    case BoundFlavor::SingleNeuron: return "single-neuron";
    case BoundFlavor::Mlp: return "mlp";
    case BoundFlavor::Perturbed: return "perturbed";
  }
  return "?";
}

enum class GammaSource { BiasUnit, DataMin, UserSupplied };

inline const char* to_string(GammaSource s) {
  switch (s) {
    case GammaSource::BiasUnit: return "bias-unit";
    case GammaSource::DataMin: return "data-min";
    case GammaSource::UserSupplied: return "user";
  }
  return "?";
}

/// Lower bound gamma on the largest input magnitude of every sample, with the
/// data's upper bound a kept for reporting.
struct GammaEstimate {
  double gamma = 1.0;
  double input_bound = 0.0;
  GammaSource source = GammaSource::BiasUnit;
};

inline GammaEstimate bias_unit_gamma(double input_bound = 0.0) { return {1.0, input_bound, GammaSource::BiasUnit}; }

inline GammaEstimate user_gamma(double gamma, double input_bound = 0.0) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ContractError("gamma must be positive");
  return {gamma, input_bound, GammaSource::UserSupplied};
}

/// gamma = min over samples of max_i |x_i|; a = max over samples and i of |x_i|.
/// With `has_bias_unit` the embedded bias activation gives gamma = 1 instead.
inline GammaEstimate estimate_gamma(const std::vector<std::vector<double>>& inputs, bool has_bias_unit = false) {
  if (inputs.empty()) throw ContractError("estimate_gamma needs at least one sample");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    double best = 0.0;
    for (double v : inputs[s]) best = std::max(best, std::abs(v));
    hi = std::max(hi, best);
    if (best == 0.0 && !has_bias_unit)
      throw AssumptionError("sample " + std::to_string(s) + " has all-zero inputs; no positive gamma exists");
    lo = std::min(lo, best);
  }
  if (has_bias_unit) return bias_unit_gamma(hi);
  return {lo, hi, GammaSource::DataMin};
}

/// A priori settling-time bound T = E0^(1-beta) / (c (1-beta)) for a loss
/// obeying dE/dt <= -c E^beta.
struct SettlingBound {
  BoundFlavor flavor = BoundFlavor::SingleNeuron;
  double E0 = 0.0;
  double c = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
  double k_min = 1.0;
  std::optional<double> M;
  double T = 0.0;
  bool heuristic = false;  ///< E0 was a dataset sum rather than a single sample's loss
};

inline double settling_time(double E0, double c, double beta) {
  if (!(c > 0.0)) throw ContractError("decay constant must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw ContractError("beta must lie in [0, 1)");
  if (!(E0 >= 0.0)) throw ContractError("E0 must be non-negative");
  return std::pow(E0, 1.0 - beta) / (c * (1.0 - beta));
}

/// c per flavor: k_min*gamma, k_min*gamma^(alpha+1) or (k_min - M)*gamma.
inline double decay_constant(BoundFlavor flavor, double k_min, double gamma, double alpha,
                             std::optional<double> M = std::nullopt) {
  switch (flavor) {
    case BoundFlavor::SingleNeuron: return k_min * gamma;
    case BoundFlavor::Mlp: return k_min * std::pow(gamma, alpha + 1.0);
    case BoundFlavor::Perturbed:
      if (!M) throw ContractError("perturbed bound needs the perturbation constant M");
      if (!(*M >= 0.0)) throw ContractError("M must be non-negative");
      if (!(k_min > *M))
        throw GuaranteeError("k_min = " + format_sig(k_min) + " does not exceed M = " + format_sig(*M) +
                             "; no settling-time guarantee exists");
      return (k_min - *M) * gamma;
  }
  return 0.0;
}

inline SettlingBound settling_bound(double E0, const GainSchedule& gains, const GammaEstimate& gamma,
                                    const LyapunovLoss& loss, BoundFlavor flavor,
                                    std::optional<double> M = std::nullopt) {
  if (!(E0 > 0.0) || !std::isfinite(E0)) throw ContractError("settling bound needs E0 > 0");
  if (!(gamma.gamma > 0.0)) throw ContractError("gamma must be positive");
  SettlingBound b;
  b.flavor = flavor;
  b.E0 = E0;
  b.gamma = gamma.gamma;
  b.k_min = gains.k_min();
  b.M = M;
  b.beta = flavor == BoundFlavor::SingleNeuron ? loss.alpha / (loss.alpha + 1.0) : loss.beta;
  b.c = decay_constant(flavor, b.k_min, b.gamma, loss.alpha, M);
  b.T = settling_time(E0, b.c, b.beta);
  return b;
}

/// Per-record check of the differential inequality dE/dt <= -c E^beta using
/// central differences over interior records.
struct DecreaseReport {
  std::vector<bool> passed;  ///< one entry per interior record
  std::size_t failures = 0;
  std::optional<std::size_t> first_failure;  ///< record index
  double worst_excess = -std::numeric_limits<double>::infinity();  ///< max of slope - (-cE^beta + slack)

  bool ok() const { return !passed.empty() && failures == 0; }
};

inline DecreaseReport verify_decrease(const Trajectory& traj, double c, double beta) {
  DecreaseReport rep;
  const auto& r = traj.records;
  if (r.size() < 3) return rep;
  for (std::size_t n = 1; n + 1 < r.size(); ++n) {
    const double slope = (r[n + 1].E - r[n - 1].E) / (r[n + 1].t - r[n - 1].t);
    const double rate = c * std::pow(r[n].E, beta);
    const double slack = 1e-6 * (1.0 + rate);
    const double excess = slope - (-rate + slack);
    const bool pass = excess <= 0.0;
    rep.passed.push_back(pass);
    rep.worst_excess = std::max(rep.worst_excess, excess);
    if (!pass) {
      ++rep.failures;
      if (!rep.first_failure) rep.first_failure = n;
    }
  }
  return rep;
}

inline DecreaseReport verify_decrease(const Trajectory& traj, const SettlingBound& bound) {
  return verify_decrease(traj, bound.c, bound.beta);
}

inline void write_bound_kv(std::ostream& out, const SettlingBound& b) {
  out << "flavor = " << to_string(b.flavor) << '\n';
  out << "E0 = " << format_double(b.E0) << '\n';
  out << "c = " << format_double(b.c) << '\n';
  out << "beta = " << format_double(b.beta) << '\n';
  out << "gamma = " << format_double(b.gamma) << '\n';
  out << "k_min = " << format_double(b.k_min) << '\n';
  out << "M = " << (b.M ? format_double(*b.M) : std::string("none")) << '\n';
  out << "T = " << format_double(b.T) << '\n';
  out << "heuristic = " << (b.heuristic ? "true" : "false") << '\n';
}

inline std::string bound_table(const SettlingBound& b) {
  std::ostringstream os;
  auto row = [&](const char* k, const std::string& v) { os << "  " << k << std::string(10 - std::string(k).size(), ' ') << v << '\n'; };
  os << "settling-time bound (" << to_string(b.flavor) << (b.heuristic ? ", heuristic" : "") << ")\n";
  row("E0", format_sig(b.E0, 10));
  row("k_min", format_sig(b.k_min, 10));
  row("gamma", format_sig(b.gamma, 10));
  row("M", b.M ? format_sig(*b.M, 10) : "-");
  row("c", format_sig(b.c, 10));
  row("beta", format_sig(b.beta, 10));
  row("T", format_sig(b.T, 10));
  return os.str();
}

}  // namespace ftnn
