#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ftnn/control.hpp"
#include "ftnn/data.hpp"
#include "ftnn/error.hpp"
#include "ftnn/format.hpp"
#include "ftnn/loss.hpp"
#include "ftnn/net.hpp"

namespace ftnn {

enum class Method { Euler, Rk4 };

/// Fixed-step integration settings. Time is the continuous training time.
struct Integrator {
  Method method = Method::Rk4;
  double dt = 1e-3;
  double t_max = 1.0;
  std::size_t step_budget = 10'000'000;
  std::size_t record_stride = 1;  ///< steps (theory flow) or epochs (epoch flow) between records

  std::size_t step_count() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("integrator dt must be positive");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ContractError("integrator t_max must be positive");
    if (record_stride == 0) throw ContractError("record stride must be at least 1");
    const double n = std::ceil(t_max / dt - 1e-9);
    if (n > static_cast<double>(step_budget))
      throw HorizonError("horizon t_max/dt = " + format_sig(n) + " steps exceeds the budget of " +
                         std::to_string(step_budget));
    return static_cast<std::size_t>(n);
  }
};

/// Training is considered settled once E <= epsilon.
struct StoppingRule {
  double epsilon = 1e-9;
};

enum class ControlLaw {
  Auto,          ///< single-neuron law for a lone sigmoid unit, multilayer law otherwise
  SingleNeuron,  ///< u_i = -k_i sign(x_i) sign(e) / sigma'(z)
  Multilayer,    ///< dw_ji = -k_ji sgnpow(delta_j z_i, alpha) E^beta
};

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
};

/// Continuous flow against one fixed sample.
struct TheoryFlow {
  Sample sample;
};

/// One Euler step of length dt per sample, cycling through the dataset.
struct EpochFlow {
  Dataset data;
  bool shuffle = false;
  std::uint64_t shuffle_seed = 0;
};

using TrainMode = std::variant<TheoryFlow, EpochFlow>;

/// Maps the nominal input to the input the update law observes at a given
/// step. Used to inject perturbations; the loss is always measured on the
/// nominal input.
using InputObserver = std::function<std::vector<double>(std::span<const double> x, std::size_t step)>;

struct FlowOptions {
  ControlLaw law = ControlLaw::Auto;
  InputObserver observe;
};

struct TrajectoryRecord {
  double t = 0.0;
  double E = 0.0;
  std::vector<double> e_bar;  ///< per-output error (theory) or per-output RMS error (epoch)
  double control_norm = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::optional<double> settled_at;  ///< first recorded t with E <= epsilon
  double epsilon = 1e-9;
  WeightSet final_weights;
  std::size_t steps = 0;
  double wall_seconds = 0.0;

  double initial_E() const { return records.empty() ? 0.0 : records.front().E; }
  double final_E() const { return records.empty() ? 0.0 : records.back().E; }
};

inline ControlLaw resolve_law(const Mlp& net, const LossKind& loss, ControlLaw requested) {
  if (!is_lyapunov(loss)) return ControlLaw::Multilayer;  // baselines: plain gradient flow
  switch (requested) {
    case ControlLaw::Auto:
      return net.is_single_neuron() ? ControlLaw::SingleNeuron : ControlLaw::Multilayer;
    case ControlLaw::SingleNeuron:
      require_single_neuron(net);
      return ControlLaw::SingleNeuron;
    case ControlLaw::Multilayer:
      return ControlLaw::Multilayer;
  }
  return ControlLaw::Multilayer;
}

/// State read by, and control produced by, one right-hand-side evaluation.
struct FlowEval {
  ControlSignal control;
  double E = 0.0;
  std::vector<double> e_bar;
};

/// Forward pass on the nominal input, control law fed with the observed input.
/// `law` must already be resolved.
inline FlowEval evaluate_flow(const Mlp& net, std::span<const double> x, std::span<const double> x_observed,
                              std::span<const double> y_star, const LossKind& loss, const GainSchedule& gains,
                              ControlLaw law) {
  FlowEval out;
  ForwardTrace tr = forward(net, x);
  out.e_bar = output_error(tr, y_star);
  out.E = loss_eval(out.e_bar, loss);

  const bool perturbed = x_observed.data() != x.data();
  if (perturbed) {
    if (x_observed.size() != x.size()) throw ShapeError("observed input has the wrong length");
    for (std::size_t i = 0; i < x.size(); ++i) tr.z[0][i] = x_observed[i];
  }
  if (law == ControlLaw::SingleNeuron) {
    out.control = single_neuron_update(std::span<const double>(tr.z[0]).first(x.size()), out.e_bar[0],
                                       tr.a[0][0], gains);
    return out;
  }
  const Deltas deltas = sensitivities(net, tr, loss_error_grad(out.e_bar, loss));
  if (const auto* lyap = std::get_if<LyapunovLoss>(&loss))
    out.control = mlp_update(deltas, tr, out.E, gains, *lyap);
  else
    out.control = baseline_update(loss_gradient(deltas, tr), gains);
  return out;
}

namespace detail {

inline void check_finite(const FlowEval& ev, double t) {
  if (!std::isfinite(ev.E)) throw DivergenceError(t, "loss became non-finite");
  if (!ev.control.finite()) throw DivergenceError(t, "control became non-finite");
}

inline void check_compatible(const Mlp& net, const Sample& s) {
  if (s.x.size() != net.input_size()) throw ShapeError("sample input width differs from network input");
  if (s.y.size() != net.output_size()) throw ShapeError("sample target width differs from network output");
}

inline std::vector<double> rms_errors(const Mlp& net, const Dataset& ds, const LossKind& loss, double& E_sum) {
  std::vector<double> acc(net.output_size(), 0.0);
  E_sum = 0.0;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto tr = forward(net, ds.inputs[s]);
    const auto e = output_error(tr, ds.targets[s]);
    E_sum += loss_eval(e, loss);
    for (std::size_t m = 0; m < e.size(); ++m) acc[m] += e[m] * e[m];
  }
  for (double& v : acc) v = std::sqrt(v / static_cast<double>(ds.size()));
  return acc;
}

inline Trajectory integrate_theory(Mlp net, const TheoryFlow& flow, const LossKind& loss, const GainSchedule& gains,
                                   const Integrator& integ, const StoppingRule& stop, const FlowOptions& opts) {
  check_compatible(net, flow.sample);
  const ControlLaw law = resolve_law(net, loss, opts.law);
  const std::size_t total = integ.step_count();
  const auto& x = flow.sample.x;
  const auto& y = flow.sample.y;
  const double dt = integ.dt;

  Trajectory traj;
  traj.epsilon = stop.epsilon;
  std::vector<double> observed;
  Mlp stage = net;

  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    std::span<const double> seen(x);
    if (opts.observe) {
      observed = opts.observe(x, n);
      seen = observed;
    }
    FlowEval k1 = evaluate_flow(net, x, seen, y, loss, gains, law);
    check_finite(k1, t);

    const bool settled = k1.E <= stop.epsilon;
    const bool last = settled || n == total;
    if (n % integ.record_stride == 0 || last)
      traj.records.push_back({t, k1.E, k1.e_bar, k1.control.norm()});
    if (settled) {
      traj.settled_at = t;
      break;
    }
    if (last) break;

    if (integ.method == Method::Euler) {
      axpy(net.weights(), dt, k1.control.rates);
    } else {
      auto rate_at = [&](const WeightSet& k, double h) {
        stage.weights() = net.weights();
        axpy(stage.weights(), h, k);
        FlowEval ev = evaluate_flow(stage, x, seen, y, loss, gains, law);
        check_finite(ev, t + h);
        return std::move(ev.control.rates);
      };
      const WeightSet& r1 = k1.control.rates;
      const WeightSet r2 = rate_at(r1, 0.5 * dt);
      const WeightSet r3 = rate_at(r2, 0.5 * dt);
      const WeightSet r4 = rate_at(r3, dt);
      auto& w = net.weights();
      for (std::size_t l = 0; l < w.size(); ++l) {
        auto dst = w[l].values();
        auto a = r1[l].values();
        auto b = r2[l].values();
        auto c = r3[l].values();
        auto d = r4[l].values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += dt / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
      }
    }
    if (!net.finite()) throw DivergenceError(t + dt, "weights became non-finite");
    traj.steps = n + 1;
  }
  traj.final_weights = net.weights();
  return traj;
}

inline Trajectory integrate_epochs(Mlp net, const EpochFlow& flow, const LossKind& loss, const GainSchedule& gains,
                                   const Integrator& integ, const StoppingRule& stop, const FlowOptions& opts) {
  const Dataset& ds = flow.data;
  if (ds.size() == 0) throw ContractError("epoch flow needs a non-empty dataset");
  check_compatible(net, Sample{ds.inputs.front(), ds.targets.front()});
  const ControlLaw law = resolve_law(net, loss, opts.law);
  const std::size_t total = integ.step_count();
  const double dt = integ.dt;

  Trajectory traj;
  traj.epsilon = stop.epsilon;
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(flow.shuffle_seed);

  double E = 0.0;
  auto errs = rms_errors(net, ds, loss, E);
  if (!std::isfinite(E)) throw DivergenceError(0.0, "loss became non-finite");
  traj.records.push_back({0.0, E, std::move(errs), 0.0});
  if (E <= stop.epsilon) traj.settled_at = 0.0;

  std::size_t step = 0;
  std::vector<double> observed;
  for (std::size_t epoch = 1; !traj.settled_at && step < total; ++epoch) {
    if (flow.shuffle) std::shuffle(order.begin(), order.end(), gen);
    double last_norm = 0.0;
    for (std::size_t k = 0; k < order.size() && step < total; ++k, ++step) {
      const auto& x = ds.inputs[order[k]];
      std::span<const double> seen(x);
      if (opts.observe) {
        observed = opts.observe(x, step);
        seen = observed;
      }
      FlowEval ev = evaluate_flow(net, x, seen, ds.targets[order[k]], loss, gains, law);
      check_finite(ev, static_cast<double>(step) * dt);
      axpy(net.weights(), dt, ev.control.rates);
      last_norm = ev.control.norm();
    }
    const double t = static_cast<double>(step) * dt;
    if (!net.finite()) throw DivergenceError(t, "weights became non-finite");
    errs = rms_errors(net, ds, loss, E);
    if (!std::isfinite(E)) throw DivergenceError(t, "loss became non-finite");
    const bool settled = E <= stop.epsilon;
    if (epoch % integ.record_stride == 0 || settled || step >= total)
      traj.records.push_back({t, E, std::move(errs), last_norm});
    if (settled) traj.settled_at = t;
  }
  traj.steps = step;
  traj.final_weights = net.weights();
  return traj;
}

}  // namespace detail

/// Integrates dw/dt = u(w) and records (t, E, e, |u|) until E <= epsilon or
/// t_max. The network is taken by value; the caller's copy is untouched.
inline Trajectory integrate(Mlp mlp, const TrainMode& mode, const LossKind& loss, const GainSchedule& gains,
                            const Integrator& integ, const StoppingRule& stop, const FlowOptions& opts = {}) {
  if (!(stop.epsilon > 0.0)) throw ContractError("stopping epsilon must be positive");
  gains.check_shape(mlp.weights());
  const auto start = std::chrono::steady_clock::now();
  Trajectory traj = std::visit(
      [&](const auto& m) -> Trajectory {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, TheoryFlow>)
          return detail::integrate_theory(std::move(mlp), m, loss, gains, integ, stop, opts);
        else
          return detail::integrate_epochs(std::move(mlp), m, loss, gains, integ, stop, opts);
      },
      mode);
  traj.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

/// First crossing of E <= epsilon, linearly interpolated between the two
/// bracketing records.
inline std::optional<double> detect_settle(const Trajectory& traj, const StoppingRule& stop) {
  const auto& r = traj.records;
  if (r.empty()) return std::nullopt;
  if (r.front().E <= stop.epsilon) return r.front().t;
  for (std::size_t n = 1; n < r.size(); ++n) {
    if (r[n].E <= stop.epsilon) {
      const double e0 = r[n - 1].E;
      const double e1 = r[n].E;
      const double frac = (e0 - stop.epsilon) / (e0 - e1);
      return r[n - 1].t + frac * (r[n].t - r[n - 1].t);
    }
  }
  return std::nullopt;
}

/// Number of consecutive record pairs with E_{n+1} > E_n + slack * (1 + E_n).
inline std::size_t monotonicity_violations(const Trajectory& traj, double slack = 1e-9) {
  std::size_t bad = 0;
  const auto& r = traj.records;
  for (std::size_t n = 1; n < r.size(); ++n)
    if (r[n].E > r[n - 1].E + slack * (1.0 + r[n - 1].E)) ++bad;
  return bad;
}

/// Time of the first record with E <= threshold, if any.
inline std::optional<double> first_time_below(const Trajectory& traj, double threshold) {
  for (const auto& rec : traj.records)
    if (rec.E <= threshold) return rec.t;
  return std::nullopt;
}

/// CSV with header t,E,settle_flag,control_norm,e_1..e_m. settle_flag is 1
/// on records with E <= epsilon.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t m = traj.records.empty() ? 0 : traj.records.front().e_bar.size();
  out << "t,E,settle_flag,control_norm";
  for (std::size_t k = 0; k < m; ++k) out << ",e_" << k + 1;
  out << '\n';
  for (const auto& rec : traj.records) {
    out << format_double(rec.t) << ',' << format_double(rec.E) << ',' << (rec.E <= traj.epsilon ? 1 : 0) << ','
        << format_double(rec.control_norm);
    for (double e : rec.e_bar) out << ',' << format_double(e);
    out << '\n';
  }
}

}  // namespace ftnn
