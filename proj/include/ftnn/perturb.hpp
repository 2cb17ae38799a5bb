#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ftnn/bounds.hpp"
#include "ftnn/dynamics.hpp"
#include "ftnn/error.hpp"

namespace ftnn {

enum class PerturbMode {
  Vanishing,  ///< |dx_i| <= M |x_i|^alpha
  Amplitude,  ///< |dx_i| <= M
};

struct PerturbationSpec {
  PerturbMode mode = PerturbMode::Vanishing;
  double M = 0.0;
  double alpha = 0.7;  ///< exponent of the vanishing bound
  std::uint64_t seed = 0;
  std::size_t hold_steps = 1;  ///< redraw period in integration steps
};

inline double perturbation_bound(double x, const PerturbationSpec& spec) {
  return spec.mode == PerturbMode::Vanishing ? spec.M * std::pow(std::abs(x), spec.alpha) : spec.M;
}

/// Seeded noise source. Each draw is a vector of unit variates r_i in
/// [-1, 1); the perturbation is r_i * B_i(x), so held draws stay admissible
/// when x changes.
class PerturbationStream {
 public:
  explicit PerturbationStream(PerturbationSpec spec) : spec_(spec), gen_(spec.seed), unit_(-1.0, 1.0) {
    if (!(spec_.M >= 0.0) || !std::isfinite(spec_.M)) throw ContractError("perturbation M must be non-negative");
    if (spec_.hold_steps == 0) throw ContractError("hold_steps must be at least 1");
    if (spec_.mode == PerturbMode::Vanishing && !(spec_.alpha >= 0.0))
      throw ContractError("vanishing-bound exponent must be non-negative");
  }

  const PerturbationSpec& spec() const noexcept { return spec_; }

  /// Perturbed copy of x with a fresh draw.
  std::vector<double> next(std::span<const double> x) {
    draw(x.size());
    return apply(x);
  }

  /// Perturbed copy of x at integration step `step`, redrawing only every
  /// hold_steps steps.
  std::vector<double> observe(std::span<const double> x, std::size_t step) {
    if (!last_step_ || step / spec_.hold_steps != *last_step_ / spec_.hold_steps || unit_draw_.size() != x.size())
      draw(x.size());
    last_step_ = step;
    return apply(x);
  }

  /// Largest |dx_i| / B_i seen so far (B_i > 0 only). Never exceeds 1.
  double max_ratio() const noexcept { return max_ratio_; }
  /// Count of entries with |dx_i| > B_i. Zero unless something is broken.
  std::size_t violations() const noexcept { return violations_; }

 private:
  void draw(std::size_t n) {
    unit_draw_.resize(n);
    for (double& r : unit_draw_) r = unit_(gen_);
  }

  std::vector<double> apply(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    if (spec_.M == 0.0) return out;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double bound = perturbation_bound(x[i], spec_);
      const double dx = unit_draw_[i] * bound;
      out[i] = x[i] + dx;
      if (std::abs(dx) > bound) ++violations_;
      if (bound > 0.0) max_ratio_ = std::max(max_ratio_, std::abs(dx) / bound);
    }
    return out;
  }

  PerturbationSpec spec_;
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unit_;
  std::vector<double> unit_draw_;
  std::optional<std::size_t> last_step_;
  double max_ratio_ = 0.0;
  std::size_t violations_ = 0;
};

/// x + dx for one seeded draw.
inline std::vector<double> perturb_input(std::span<const double> x, const PerturbationSpec& spec) {
  PerturbationStream stream(spec);
  return stream.next(x);
}

struct RobustnessResult {
  Trajectory trajectory;
  std::optional<SettlingBound> bound;  ///< present only when a guarantee exists
  bool guaranteed = false;
  std::string note;
  double max_draw_ratio = 0.0;
  std::size_t admissibility_violations = 0;
};

/// Integrates with the update law observing perturbed inputs, redrawn per
/// step (or every hold_steps). The bound uses c = (k_min - M) gamma and is
/// only issued for vanishing perturbations with k_min > M.
inline RobustnessResult robustness_run(const Mlp& mlp, const TrainMode& mode, const PerturbationSpec& spec,
                                       const LossKind& loss, const GainSchedule& gains, const Integrator& integ,
                                       const StoppingRule& stop, const GammaEstimate& gamma,
                                       ControlLaw law = ControlLaw::Auto) {
  RobustnessResult res;
  const auto* lyap = std::get_if<LyapunovLoss>(&loss);
  if (!lyap) {
    res.note = "baseline loss: empirical only";
  } else if (spec.mode == PerturbMode::Amplitude) {
    res.note = "amplitude-bounded noise: empirical only";
  } else if (!(gains.k_min() > spec.M)) {
    res.note = "unguaranteed: k_min <= M";
  } else {
    double E0 = 0.0;
    bool heuristic = false;
    if (const auto* th = std::get_if<TheoryFlow>(&mode)) {
      E0 = loss_eval(output_error(forward(mlp, th->sample.x), th->sample.y), loss);
    } else {
      const auto& ds = std::get<EpochFlow>(mode).data;
      for (std::size_t s = 0; s < ds.size(); ++s)
        E0 += loss_eval(output_error(forward(mlp, ds.inputs[s]), ds.targets[s]), loss);
      heuristic = true;
    }
    if (E0 > 0.0) {
      res.bound = settling_bound(E0, gains, gamma, *lyap, BoundFlavor::Perturbed, spec.M);
      res.bound->heuristic = heuristic;
      res.guaranteed = !heuristic;
      res.note = heuristic ? "heuristic: dataset-summed E0" : "guaranteed";
    } else {
      res.note = "already settled";
    }
  }

  auto stream = std::make_shared<PerturbationStream>(spec);
  FlowOptions opts;
  opts.law = law;
  opts.observe = [stream](std::span<const double> x, std::size_t step) { return stream->observe(x, step); };
  res.trajectory = integrate(mlp, mode, loss, gains, integ, stop, opts);
  res.max_draw_ratio = stream->max_ratio();
  res.admissibility_violations = stream->violations();
  return res;
}

}  // namespace ftnn
