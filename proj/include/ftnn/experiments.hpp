#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ftnn/bounds.hpp"
#include "ftnn/config.hpp"
#include "ftnn/data.hpp"
#include "ftnn/dynamics.hpp"
#include "ftnn/net.hpp"
#include "ftnn/perturb.hpp"
#include "ftnn/report.hpp"

namespace ftnn {

/// One trained (or evaluated) variant.
struct RunRow {
  std::string variant;
  std::optional<double> bound_T;
  std::optional<double> settle;          ///< interpolated crossing of E <= epsilon
  std::optional<double> reach_time;      ///< first record with E <= compare threshold
  double initial_E = 0.0;
  double final_E = 0.0;
  std::optional<double> test_E;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::size_t monotonicity_violations = 0;
  bool guaranteed = false;
  std::string note;
};

struct RunSummary {
  std::string command;
  std::vector<RunRow> rows;
  std::map<std::string, std::string> extra;  ///< command-specific scalars
};

struct CommandResult {
  RunSummary summary;
  std::vector<std::pair<std::string, Trajectory>> trajectories;
  std::vector<SettlingBound> bounds;
  std::string report;  ///< human-readable table
};

inline void write_summary_kv(std::ostream& out, const RunSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("none"); };
  out << "command = " << s.command << '\n';
  for (const auto& [k, v] : s.extra) out << k << " = " << v << '\n';
  out << "rows = " << s.rows.size() << '\n';
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& r = s.rows[i];
    const std::string p = "row." + std::to_string(i + 1) + ".";
    out << p << "variant = " << r.variant << '\n';
    out << p << "bound_T = " << opt(r.bound_T) << '\n';
    out << p << "settle = " << opt(r.settle) << '\n';
    out << p << "reach_time = " << opt(r.reach_time) << '\n';
    out << p << "initial_E = " << format_double(r.initial_E) << '\n';
    out << p << "final_E = " << format_double(r.final_E) << '\n';
    out << p << "test_E = " << opt(r.test_E) << '\n';
    out << p << "steps = " << r.steps << '\n';
    out << p << "monotonicity_violations = " << r.monotonicity_violations << '\n';
    out << p << "guaranteed = " << (r.guaranteed ? "true" : "false") << '\n';
    out << p << "note = " << r.note << '\n';
    out << p << "wall_seconds = " << format_sig(r.wall_seconds, 4) << '\n';
  }
}

inline std::string summary_table(const RunSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? format_sig(*v, 7) : std::string("-"); };
  auto pad = [](std::string v, std::size_t w) {
    if (v.size() < w) v += std::string(w - v.size(), ' ');
    return v;
  };
  std::ostringstream os;
  os << pad("variant", 18) << pad("bound T", 15) << pad("settle t", 15) << pad("t(E<=thr)", 15) << pad("final E", 15)
     << pad("wall s", 10) << "note\n";
  for (const auto& r : s.rows)
    os << pad(r.variant, 18) << pad(opt(r.bound_T), 15) << pad(opt(r.settle), 15) << pad(opt(r.reach_time), 15)
       << pad(format_sig(r.final_E, 7), 15) << pad(format_sig(r.wall_seconds, 3), 10) << r.note << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Building blocks shared by the commands

struct PreparedData {
  Dataset train;
  std::optional<Dataset> test;
};

inline PreparedData prepare_data(const ExperimentConfig& c) {
  const auto& d = c.data;
  Dataset ds;
  switch (d.source) {
    case DataSource::Inline:
      return {make_dataset("inline", {d.x}, {d.y}), std::nullopt};
    case DataSource::Csv: {
      CsvSchema schema;
      schema.features = d.features;
      schema.targets = d.targets;
      if (!d.label_column.empty())
        schema.labels = CsvSchema::LabelMap{d.label_column, {{d.label_negative, 0.0}, {d.label_positive, 1.0}}};
      ds = normalize(load_csv(d.path, schema), d.normalization);
      break;
    }
    case DataSource::Blobs:
      ds = gen_blobs(c.seed, d.per_class, d.separation, d.dims);
      break;
    case DataSource::Linreg:
      ds = gen_linreg(c.seed, d.count, d.noise_sd, d.coeffs);
      break;
  }
  if (d.split && ds.size() >= 5) {
    auto [tr, te] = split(ds, c.seed);
    return {std::move(tr), std::move(te)};
  }
  return {std::move(ds), std::nullopt};
}

inline Mlp build_network(const ExperimentConfig& c) {
  return Mlp::random(c.layers, c.output, c.seed, c.init_scale);
}

inline TrainMode build_mode(const ExperimentConfig& c, const PreparedData& data) {
  if (c.mode == ModeKind::Epoch) return EpochFlow{data.train, c.shuffle, c.seed};
  const auto idx = c.data.sample_index;
  if (idx >= data.train.size())
    throw ConfigError({"data.sample: index " + std::to_string(idx) + " out of range for " +
                       std::to_string(data.train.size()) + " training samples"});
  return TheoryFlow{Sample{data.train.inputs[idx], data.train.targets[idx]}};
}

inline std::vector<std::vector<double>> mode_inputs(const TrainMode& mode) {
  if (const auto* th = std::get_if<TheoryFlow>(&mode)) return {th->sample.x};
  return std::get<EpochFlow>(mode).data.inputs;
}

inline ControlLaw planned_law(const ExperimentConfig& c, const Mlp& net, const std::string& kind) {
  if (kind != "lyapunov") return ControlLaw::Multilayer;
  if (c.law == ControlLaw::Auto) return net.is_single_neuron() ? ControlLaw::SingleNeuron : ControlLaw::Multilayer;
  return c.law;
}

inline LossKind build_loss(const ExperimentConfig& c, const std::string& kind, double alpha, ControlLaw law) {
  if (kind == "l1") return L1Loss{};
  if (kind == "l2") return L2Loss{};
  const auto policy = c.unsafe_alpha ? AlphaPolicy::AllowZero : AlphaPolicy::Strict;
  if (law == ControlLaw::SingleNeuron) return LyapunovLoss::single_neuron(alpha, policy);
  return LyapunovLoss::multilayer(alpha, c.beta, policy);
}

inline double initial_loss(const Mlp& net, const TrainMode& mode, const LossKind& loss) {
  if (const auto* th = std::get_if<TheoryFlow>(&mode))
    return loss_eval(output_error(forward(net, th->sample.x), th->sample.y), loss);
  const auto& ds = std::get<EpochFlow>(mode).data;
  double E = 0.0;
  for (std::size_t s = 0; s < ds.size(); ++s) E += loss_eval(output_error(forward(net, ds.inputs[s]), ds.targets[s]), loss);
  return E;
}

inline double dataset_loss(const Mlp& net, const Dataset& ds, const LossKind& loss) {
  double E = 0.0;
  for (std::size_t s = 0; s < ds.size(); ++s) E += loss_eval(output_error(forward(net, ds.inputs[s]), ds.targets[s]), loss);
  return E;
}

inline GammaEstimate choose_gamma(const ExperimentConfig& c, const TrainMode& mode, BoundFlavor flavor) {
  const auto inputs = mode_inputs(mode);
  double a = 0.0;
  for (const auto& x : inputs)
    for (double v : x) a = std::max(a, std::abs(v));
  if (c.gamma == "bias") return bias_unit_gamma(a);
  if (c.gamma == "data") return estimate_gamma(inputs);
  if (c.gamma == "auto") return flavor == BoundFlavor::Mlp ? bias_unit_gamma(a) : estimate_gamma(inputs);
  double g = 0.0;
  parse_double(c.gamma, g);
  return user_gamma(g, a);
}

/// A priori bound for a Lyapunov run, or nothing when none applies.
inline std::optional<SettlingBound> plan_bound(const ExperimentConfig& c, const Mlp& net, const TrainMode& mode,
                                               const LossKind& loss, const GainSchedule& gains, ControlLaw law,
                                               std::optional<double> M = std::nullopt) {
  const auto* lyap = std::get_if<LyapunovLoss>(&loss);
  if (!lyap) return std::nullopt;
  const double E0 = c.bound_E0.value_or(initial_loss(net, mode, loss));
  if (!(E0 > 0.0)) return std::nullopt;
  BoundFlavor flavor = law == ControlLaw::SingleNeuron ? BoundFlavor::SingleNeuron : BoundFlavor::Mlp;
  const GammaEstimate gamma = choose_gamma(c, mode, flavor);
  if (M) flavor = BoundFlavor::Perturbed;
  auto b = settling_bound(E0, gains, gamma, *lyap, flavor, M);
  b.heuristic = std::holds_alternative<EpochFlow>(mode);
  return b;
}

inline Integrator plan_integrator(const ExperimentConfig& c, const TrainMode& mode,
                                  const std::optional<SettlingBound>& bound) {
  Integrator in;
  in.method = c.method;
  in.step_budget = c.step_budget;
  if (const auto* ep = std::get_if<EpochFlow>(&mode)) {
    in.method = Method::Euler;
    in.dt = c.dt.value_or(1e-3);
    in.t_max = c.t_max.value_or(static_cast<double>(c.epochs) * static_cast<double>(ep->data.size()) * in.dt);
    in.record_stride = c.record_stride.value_or(1);
    return in;
  }
  const bool use_bound = bound && !bound->heuristic && std::isfinite(bound->T) && bound->T > 0.0;
  in.dt = c.dt.value_or(use_bound ? bound->T / 1e5 : 1e-3);
  in.t_max = c.t_max.value_or(use_bound ? 10.0 * bound->T : 10.0);
  in.record_stride = c.record_stride.value_or(1);
  return in;
}

inline RunRow make_row(std::string variant, const Trajectory& traj, const StoppingRule& stop,
                       const std::optional<SettlingBound>& bound, double threshold) {
  RunRow r;
  r.variant = std::move(variant);
  if (bound) r.bound_T = bound->T;
  r.settle = detect_settle(traj, stop);
  r.reach_time = first_time_below(traj, threshold);
  r.initial_E = traj.initial_E();
  r.final_E = traj.final_E();
  r.wall_seconds = traj.wall_seconds;
  r.steps = traj.steps;
  r.monotonicity_violations = monotonicity_violations(traj);
  return r;
}

/// Near e = 0 the single-neuron sign law makes the four RK4 stages cancel
/// once |e| < c dt / 2, so E stalls near (c dt / 2)^(alpha+1) / (alpha+1).
/// Returns that level for single-neuron theory runs.
inline std::optional<double> chatter_floor(const TrainMode& mode, ControlLaw law, const GainSchedule& gains,
                                           const LossKind& loss, double dt) {
  const auto* th = std::get_if<TheoryFlow>(&mode);
  const auto* lyap = std::get_if<LyapunovLoss>(&loss);
  if (!th || !lyap || law != ControlLaw::SingleNeuron) return std::nullopt;
  double c = 0.0;
  for (std::size_t i = 0; i < th->sample.x.size(); ++i) c += gains.at(0, 0, i) * std::abs(th->sample.x[i]);
  return std::pow(0.5 * c * dt, lyap->alpha + 1.0) / (lyap->alpha + 1.0);
}

inline void flag_coarse_dt(RunRow& row, const std::optional<double>& floor, double epsilon) {
  if (floor && *floor > epsilon) row.note += "; dt coarse for epsilon (stall level E~" + format_sig(*floor, 3) + ")";
}

/// Marks guaranteed rows whose run outlived the bound without settling.
inline void flag_exceeded(RunRow& row, const Trajectory& traj) {
  if (!row.guaranteed || !row.bound_T || traj.records.empty()) return;
  const bool exceeded = row.settle ? *row.settle > *row.bound_T : traj.records.back().t > *row.bound_T;
  if (exceeded) row.note += "; BOUND EXCEEDED";
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory");
}

inline std::ofstream open_out(const std::string& dir, const std::string& name) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot write output file");
  return out;
}

inline void write_trajectory_file(const std::string& dir, const std::string& name, const Trajectory& traj) {
  auto out = open_out(dir, name);
  write_trajectory_csv(out, traj);
}

inline void write_curves(const ExperimentConfig& c, const std::vector<Series>& series, const std::string& title) {
  {
    auto out = open_out(c.out_dir, "curves.dat");
    write_curves_dat(out, series);
  }
  if (c.svg) {
    auto out = open_out(c.out_dir, "loss_curve.svg");
    out << svg_line_chart(series, title, "time t", "E", c.log_y);
  }
}

inline void write_summary(const ExperimentConfig& c, const RunSummary& s) {
  auto out = open_out(c.out_dir, "summary.kv");
  write_summary_kv(out, s);
}

inline std::string alpha_tag(double a) {
  std::string s = format_sig(a, 6);
  for (char& ch : s)
    if (ch == '.') ch = 'p';
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

/// Single training run. Writes trajectory.csv, summary.kv, curves.dat,
/// loss_curve.svg and, when a bound exists, bound.kv.
inline CommandResult cmd_train(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const ControlLaw law = planned_law(c, net, c.loss);
  const LossKind loss = build_loss(c, c.loss, c.alpha, law);
  const GainSchedule gains = GainSchedule::scalar(c.k);
  const StoppingRule stop{c.epsilon};

  CommandResult res;
  res.summary.command = "train";
  std::optional<SettlingBound> bound;
  Trajectory traj;
  std::string note;
  bool guaranteed = false;
  double dt_used = 0.0;
  if (c.perturb) {
    PerturbationSpec spec{c.perturb_mode, c.perturb_M, c.perturb_alpha.value_or(c.alpha), c.seed, c.perturb_hold};
    const auto nominal = plan_bound(c, net, mode, loss, gains, law);
    const Integrator integ = plan_integrator(c, mode, nominal);
    dt_used = integ.dt;
    const GammaEstimate gamma =
        choose_gamma(c, mode, law == ControlLaw::SingleNeuron ? BoundFlavor::SingleNeuron : BoundFlavor::Mlp);
    auto rr = robustness_run(net, mode, spec, loss, gains, integ, stop, gamma, law);
    traj = std::move(rr.trajectory);
    bound = rr.bound;
    note = rr.note;
    guaranteed = rr.guaranteed;
  } else {
    bound = plan_bound(c, net, mode, loss, gains, law);
    const Integrator integ = plan_integrator(c, mode, bound);
    dt_used = integ.dt;
    FlowOptions opts;
    opts.law = law;
    traj = integrate(net, mode, loss, gains, integ, stop, opts);
    guaranteed = bound && !bound->heuristic;
    note = bound ? (bound->heuristic ? "heuristic bound" : "guaranteed") : "no bound";
  }

  RunRow row = make_row(std::string(loss_name(loss)), traj, stop, bound, c.compare_threshold);
  row.guaranteed = guaranteed;
  row.note = note;
  flag_exceeded(row, traj);
  flag_coarse_dt(row, chatter_floor(mode, law, gains, loss, dt_used), c.epsilon);
  if (data.test) {
    Mlp trained = net;
    trained.set_weights(traj.final_weights);
    row.test_E = dataset_loss(trained, *data.test, loss);
  }
  res.summary.rows.push_back(row);
  if (bound) res.bounds.push_back(*bound);

  detail::ensure_dir(c.out_dir);
  detail::write_trajectory_file(c.out_dir, "trajectory.csv", traj);
  detail::write_summary(c, res.summary);
  if (bound) {
    auto out = detail::open_out(c.out_dir, "bound.kv");
    write_bound_kv(out, *bound);
  }
  detail::write_curves(c, {loss_series(row.variant, traj)}, "training loss");
  res.report = summary_table(res.summary);
  if (bound) res.report += bound_table(*bound);
  res.trajectories.emplace_back(row.variant, std::move(traj));
  return res;
}

/// L1, L2 and Lyapunov runs from identical initial weights, gains and
/// integrator settings.
inline CommandResult cmd_compare(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const GainSchedule gains = GainSchedule::scalar(c.k);
  const StoppingRule stop{c.epsilon};

  const ControlLaw lyap_law = planned_law(c, net, "lyapunov");
  const LossKind lyap = build_loss(c, "lyapunov", c.alpha, lyap_law);
  const auto bound = plan_bound(c, net, mode, lyap, gains, lyap_law);
  const Integrator integ = plan_integrator(c, mode, bound);

  const std::vector<std::string> kinds{"l1", "l2", "lyapunov"};
  std::vector<std::future<Trajectory>> jobs;
  for (const auto& kind : kinds) {
    jobs.push_back(std::async(std::launch::async, [&, kind] {
      const ControlLaw law = planned_law(c, net, kind);
      FlowOptions opts;
      opts.law = law;
      return integrate(net, mode, build_loss(c, kind, c.alpha, law), gains, integ, stop, opts);
    }));
  }

  CommandResult res;
  res.summary.command = "compare";
  res.summary.extra["threshold"] = format_double(c.compare_threshold);
  std::vector<Series> series;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    Trajectory traj = jobs[k].get();
    const bool is_lyap = kinds[k] == "lyapunov";
    RunRow row = make_row(kinds[k], traj, stop, is_lyap ? bound : std::nullopt, c.compare_threshold);
    row.guaranteed = is_lyap && bound && !bound->heuristic;
    row.note = is_lyap ? (bound ? (bound->heuristic ? "heuristic bound" : "guaranteed") : "no bound") : "baseline";
    flag_exceeded(row, traj);
    if (is_lyap) flag_coarse_dt(row, chatter_floor(mode, lyap_law, gains, lyap, integ.dt), c.epsilon);
    if (data.test) {
      Mlp trained = net;
      trained.set_weights(traj.final_weights);
      row.test_E = dataset_loss(trained, *data.test, build_loss(c, kinds[k], c.alpha, planned_law(c, net, kinds[k])));
    }
    series.push_back(loss_series(kinds[k], traj));
    res.summary.rows.push_back(row);
    res.trajectories.emplace_back(kinds[k], std::move(traj));
  }
  if (bound) res.bounds.push_back(*bound);

  detail::ensure_dir(c.out_dir);
  for (const auto& [name, traj] : res.trajectories)
    detail::write_trajectory_file(c.out_dir, "trajectory_" + name + ".csv", traj);
  detail::write_summary(c, res.summary);
  detail::write_curves(c, series, "L1 vs L2 vs Lyapunov");
  res.report = summary_table(res.summary);
  return res;
}

/// Settling-time bound for every gain in sweep.k at the configured E0, gamma
/// and alpha. With perturbations enabled the perturbed bound is used and
/// gains not exceeding M are reported as unguaranteed.
inline CommandResult cmd_bound(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const ControlLaw law = planned_law(c, net, "lyapunov");
  const LossKind loss = build_loss(c, "lyapunov", c.alpha, law);
  const auto& lyap = std::get<LyapunovLoss>(loss);
  const double E0 = c.bound_E0.value_or(initial_loss(net, mode, loss));
  if (!(E0 > 0.0)) throw ContractError("initial loss is zero; no bound to compute");
  BoundFlavor flavor = law == ControlLaw::SingleNeuron ? BoundFlavor::SingleNeuron : BoundFlavor::Mlp;
  const GammaEstimate gamma = choose_gamma(c, mode, flavor);
  std::optional<double> M;
  if (c.perturb) {
    flavor = BoundFlavor::Perturbed;
    M = c.perturb_M;
  }

  CommandResult res;
  res.summary.command = "bound";
  res.summary.extra["E0"] = format_double(E0);
  res.summary.extra["gamma"] = format_double(gamma.gamma);
  res.summary.extra["gamma_source"] = to_string(gamma.source);
  res.summary.extra["input_bound"] = format_double(gamma.input_bound);
  res.summary.extra["flavor"] = to_string(flavor);
  std::ostringstream table;
  table << "k            T              T/T(first)\n";
  std::optional<double> first;
  detail::ensure_dir(c.out_dir);
  auto kv = detail::open_out(c.out_dir, "bound.kv");
  for (std::size_t i = 0; i < c.sweep_k.size(); ++i) {
    RunRow row;
    row.variant = "k=" + format_sig(c.sweep_k[i], 6);
    row.initial_E = E0;
    try {
      auto b = settling_bound(E0, GainSchedule::scalar(c.sweep_k[i]), gamma, lyap, flavor, M);
      b.heuristic = std::holds_alternative<EpochFlow>(mode);
      row.bound_T = b.T;
      row.guaranteed = !b.heuristic;
      row.note = b.heuristic ? "heuristic" : "guaranteed";
      if (!first) first = b.T;
      table << std::left;
      table << format_sig(c.sweep_k[i], 6) << std::string(13 - std::min<std::size_t>(12, format_sig(c.sweep_k[i], 6).size()), ' ')
            << format_sig(b.T, 10) << std::string(15 - std::min<std::size_t>(14, format_sig(b.T, 10).size()), ' ')
            << format_sig(b.T / *first, 10) << '\n';
      kv << "# k = " << format_double(c.sweep_k[i]) << '\n';
      write_bound_kv(kv, b);
      res.bounds.push_back(b);
    } catch (const GuaranteeError& e) {
      row.note = "unguaranteed: k_min <= M";
      table << format_sig(c.sweep_k[i], 6) << "  unguaranteed (k <= M)\n";
    }
    res.summary.rows.push_back(row);
  }
  detail::write_summary(c, res.summary);
  res.report = table.str();
  return res;
}

/// Robustness run for every M in sweep.M.
inline CommandResult cmd_perturb_sweep(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const ControlLaw law = planned_law(c, net, c.loss);
  const LossKind loss = build_loss(c, c.loss, c.alpha, law);
  const GainSchedule gains = GainSchedule::scalar(c.k);
  const StoppingRule stop{c.epsilon};
  const auto nominal = plan_bound(c, net, mode, loss, gains, law);
  const Integrator integ = plan_integrator(c, mode, nominal);
  const GammaEstimate gamma =
      choose_gamma(c, mode, law == ControlLaw::SingleNeuron ? BoundFlavor::SingleNeuron : BoundFlavor::Mlp);

  std::vector<std::future<RobustnessResult>> jobs;
  for (double M : c.sweep_M) {
    PerturbationSpec spec{c.perturb_mode, M, c.perturb_alpha.value_or(c.alpha), c.seed, c.perturb_hold};
    jobs.push_back(std::async(std::launch::async,
                              [&, spec] { return robustness_run(net, mode, spec, loss, gains, integ, stop, gamma, law); }));
  }
  CommandResult res;
  res.summary.command = "perturb-sweep";
  std::vector<Series> series;
  detail::ensure_dir(c.out_dir);
  for (std::size_t i = 0; i < c.sweep_M.size(); ++i) {
    RobustnessResult rr = jobs[i].get();
    const std::string name = "M=" + format_sig(c.sweep_M[i], 6);
    RunRow row = make_row(name, rr.trajectory, stop, rr.bound, c.compare_threshold);
    row.guaranteed = rr.guaranteed;
    row.note = rr.note;
    flag_exceeded(row, rr.trajectory);
    flag_coarse_dt(row, chatter_floor(mode, law, gains, loss, integ.dt), c.epsilon);
    if (rr.bound) res.bounds.push_back(*rr.bound);
    series.push_back(loss_series(name, rr.trajectory));
    detail::write_trajectory_file(c.out_dir, "trajectory_M" + detail::alpha_tag(c.sweep_M[i]) + ".csv", rr.trajectory);
    res.summary.rows.push_back(row);
    res.trajectories.emplace_back(name, std::move(rr.trajectory));
  }
  detail::write_summary(c, res.summary);
  detail::write_curves(c, series, "perturbation sweep");
  res.report = summary_table(res.summary);
  return res;
}

/// One run per alpha in sweep.alpha, all on the integrator planned for the
/// configured loss.alpha. Runs whose loss rises between records are flagged.
inline CommandResult cmd_alpha_sweep(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const ControlLaw law = planned_law(c, net, "lyapunov");
  const GainSchedule gains = GainSchedule::scalar(c.k);
  const StoppingRule stop{c.epsilon};
  const LossKind base = build_loss(c, "lyapunov", c.alpha, law);
  const Integrator integ = plan_integrator(c, mode, plan_bound(c, net, mode, base, gains, law));

  std::vector<std::future<Trajectory>> jobs;
  std::vector<LossKind> losses;
  for (double a : c.sweep_alpha) losses.push_back(build_loss(c, "lyapunov", a, law));
  for (const auto& loss : losses) {
    jobs.push_back(std::async(std::launch::async, [&, loss] {
      FlowOptions opts;
      opts.law = law;
      return integrate(net, mode, loss, gains, integ, stop, opts);
    }));
  }
  CommandResult res;
  res.summary.command = "alpha-sweep";
  std::vector<Series> series;
  detail::ensure_dir(c.out_dir);
  for (std::size_t i = 0; i < c.sweep_alpha.size(); ++i) {
    Trajectory traj = jobs[i].get();
    const double a = c.sweep_alpha[i];
    const std::string name = "alpha=" + format_sig(a, 6);
    std::optional<SettlingBound> b;
    try {
      b = plan_bound(c, net, mode, losses[i], gains, law);
    } catch (const Error&) {
    }
    RunRow row = make_row(name, traj, stop, b, c.compare_threshold);
    row.guaranteed = a > 0.0 && b && !b->heuristic;
    std::string note;
    if (a == 0.0) note = "alpha = 0 instability demo (discontinuous law)";
    if (row.monotonicity_violations > 0) note += std::string(note.empty() ? "" : "; ") + "unstable: loss increased";
    if (!row.settle) note += std::string(note.empty() ? "" : "; ") + "did not settle";
    row.note = note.empty() ? "settled" : note;
    flag_exceeded(row, traj);
    flag_coarse_dt(row, chatter_floor(mode, law, gains, losses[i], integ.dt), c.epsilon);
    series.push_back(loss_series(name, traj));
    detail::write_trajectory_file(c.out_dir, "trajectory_alpha" + detail::alpha_tag(a) + ".csv", traj);
    res.summary.rows.push_back(row);
    res.trajectories.emplace_back(name, std::move(traj));
  }
  detail::write_summary(c, res.summary);
  detail::write_curves(c, series, "alpha sweep");
  res.report = summary_table(res.summary);
  return res;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t weights_checked = 0;
  double min_abs_error_signal = 0.0;  ///< min_m |e_m| at the checked state
};

/// Backprop gradient (delta_j z_i) against central differences of E over
/// every weight. Relative error is |g - fd| / max(|g|, |fd|, 1e-4).
inline GradientCheck check_gradient(const Mlp& net, std::span<const double> x, std::span<const double> y_star,
                                    const LossKind& loss, double h = 1e-6) {
  const auto tr = forward(net, x);
  const auto grad = loss_gradient(sensitivities(net, tr, y_star, loss), tr);
  GradientCheck out;
  const auto e = output_error(tr, y_star);
  out.min_abs_error_signal = std::numeric_limits<double>::infinity();
  for (double v : e) out.min_abs_error_signal = std::min(out.min_abs_error_signal, std::abs(v));
  Mlp probe = net;
  auto E_at = [&] { return loss_eval(output_error(forward(probe, x), y_star), loss); };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto w = probe.weights(l).values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double keep = w[k];
      w[k] = keep + h;
      const double up = E_at();
      w[k] = keep - h;
      const double down = E_at();
      w[k] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double g = grad[l].values()[k];
      const double abs_err = std::abs(g - fd);
      out.max_absolute_error = std::max(out.max_absolute_error, abs_err);
      out.max_relative_error =
          std::max(out.max_relative_error, abs_err / std::max({std::abs(g), std::abs(fd), 1e-4}));
      ++out.weights_checked;
    }
  }
  return out;
}

inline CommandResult cmd_gradcheck(const ExperimentConfig& c) {
  const PreparedData data = prepare_data(c);
  const Mlp net = build_network(c);
  const TrainMode mode = build_mode(c, data);
  const ControlLaw law = planned_law(c, net, c.loss);
  const LossKind loss = build_loss(c, c.loss, c.alpha, law);
  GradientCheck worst;
  worst.min_abs_error_signal = std::numeric_limits<double>::infinity();
  auto absorb = [&](const GradientCheck& g) {
    worst.max_relative_error = std::max(worst.max_relative_error, g.max_relative_error);
    worst.max_absolute_error = std::max(worst.max_absolute_error, g.max_absolute_error);
    worst.weights_checked += g.weights_checked;
    worst.min_abs_error_signal = std::min(worst.min_abs_error_signal, g.min_abs_error_signal);
  };
  std::size_t samples = 0;
  if (const auto* th = std::get_if<TheoryFlow>(&mode)) {
    absorb(check_gradient(net, th->sample.x, th->sample.y, loss, c.gradcheck_h));
    samples = 1;
  } else {
    const auto& ds = std::get<EpochFlow>(mode).data;
    for (std::size_t s = 0; s < ds.size(); ++s) absorb(check_gradient(net, ds.inputs[s], ds.targets[s], loss, c.gradcheck_h));
    samples = ds.size();
  }
  CommandResult res;
  res.summary.command = "gradcheck";
  res.summary.extra["samples"] = std::to_string(samples);
  res.summary.extra["weights_checked"] = std::to_string(worst.weights_checked);
  res.summary.extra["h"] = format_double(c.gradcheck_h);
  res.summary.extra["max_relative_error"] = format_double(worst.max_relative_error);
  res.summary.extra["max_absolute_error"] = format_double(worst.max_absolute_error);
  res.summary.extra["min_abs_output_error"] = format_double(worst.min_abs_error_signal);
  detail::ensure_dir(c.out_dir);
  detail::write_summary(c, res.summary);
  std::ostringstream os;
  os << "gradient check over " << worst.weights_checked << " weight evaluations (" << samples << " samples)\n"
     << "  max relative error  " << format_sig(worst.max_relative_error, 4) << '\n'
     << "  max absolute error  " << format_sig(worst.max_absolute_error, 4) << '\n';
  res.report = os.str();
  return res;
}

}  // namespace ftnn
