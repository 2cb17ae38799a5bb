#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ftnn/data.hpp"
#include "ftnn/dynamics.hpp"
#include "ftnn/error.hpp"
#include "ftnn/format.hpp"
#include "ftnn/net.hpp"
#include "ftnn/perturb.hpp"

namespace ftnn {

enum class DataSource { Inline, Csv, Blobs, Linreg };
enum class ModeKind { Theory, Epoch };

struct DataSpec {
  DataSource source = DataSource::Inline;
  // csv
  std::string path;
  std::vector<std::string> features;
  std::vector<std::string> targets;
  std::string label_column;
  std::string label_negative;
  std::string label_positive;
  Normalization normalization = Normalization::MinMaxUnit;
  bool split = true;
  // blobs
  std::size_t per_class = 50;
  double separation = 5.0;
  std::size_t dims = 4;
  // linreg
  std::size_t count = 100;
  double noise_sd = 0.0;
  std::vector<double> coeffs{0.5, -0.3, 0.8, 0.2};
  // inline sample
  std::vector<double> x;
  std::vector<double> y;
  // theory flow picks one training sample
  std::size_t sample_index = 0;
};

/// Everything one experiment needs. Parsed from a flat `section.key = value`
/// file; command-line flags override the matching keys.
struct ExperimentConfig {
  std::vector<std::size_t> layers{4, 1};
  Activation output = Activation::Sigmoid;
  double init_scale = 0.5;

  std::string loss = "lyapunov";  // lyapunov | l1 | l2
  double alpha = 0.7;
  std::optional<double> beta;
  ControlLaw law = ControlLaw::Auto;
  double k = 1.0;

  Method method = Method::Rk4;
  std::optional<double> dt;
  std::optional<double> t_max;
  std::size_t step_budget = 10'000'000;
  std::optional<std::size_t> record_stride;
  double epsilon = 1e-9;

  ModeKind mode = ModeKind::Theory;
  std::size_t epochs = 1000;
  bool shuffle = false;

  DataSpec data;

  std::string gamma = "auto";  // auto | bias | data | <positive number>
  std::optional<double> bound_E0;

  PerturbMode perturb_mode = PerturbMode::Vanishing;
  bool perturb = false;
  double perturb_M = 0.0;
  std::optional<double> perturb_alpha;
  std::size_t perturb_hold = 1;

  std::vector<double> sweep_M{0.1, 0.2, 0.3};
  std::vector<double> sweep_alpha{0.5, 0.7, 0.9};
  std::vector<double> sweep_k{1.0, 5.0, 10.0};
  double compare_threshold = 1e-3;
  double gradcheck_h = 1e-6;

  std::uint64_t seed = 42;
  std::string out_dir = "out";
  bool svg = true;
  bool log_y = true;
  bool unsafe_alpha = false;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    auto t = trim(cur);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

class ConfigReader {
 public:
  std::vector<std::string> problems;

  bool as_double(const std::string& key, const std::string& v, double& out) {
    if (parse_double(v, out)) return true;
    problems.push_back(key + ": expected a number, got '" + v + "'");
    return false;
  }
  bool as_size(const std::string& key, const std::string& v, std::size_t& out) {
    double d;
    if (parse_double(v, d) && d >= 0.0 && d == std::floor(d) && d < 1e18) {
      out = static_cast<std::size_t>(d);
      return true;
    }
    problems.push_back(key + ": expected a non-negative integer, got '" + v + "'");
    return false;
  }
  bool as_bool(const std::string& key, const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    problems.push_back(key + ": expected true/false, got '" + v + "'");
    return false;
  }
  bool as_doubles(const std::string& key, const std::string& v, std::vector<double>& out) {
    std::vector<double> tmp;
    for (const auto& item : split_list(v)) {
      double d;
      if (!parse_double(item, d)) {
        problems.push_back(key + ": expected a comma-separated list of numbers, got '" + v + "'");
        return false;
      }
      tmp.push_back(d);
    }
    out = std::move(tmp);
    return true;
  }
  template <class E>
  bool as_enum(const std::string& key, const std::string& v, const std::map<std::string, E>& table, E& out) {
    auto it = table.find(v);
    if (it != table.end()) return out = it->second, true;
    std::string opts;
    for (const auto& [name, _] : table) opts += (opts.empty() ? "" : "|") + name;
    problems.push_back(key + ": expected one of " + opts + ", got '" + v + "'");
    return false;
  }
};

}  // namespace detail

/// Applies one key to the config, recording problems instead of throwing.
inline void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& v,
                             detail::ConfigReader& rd) {
  double d = 0.0;
  std::size_t n = 0;
  if (key == "network.layers") {
    std::vector<double> tmp;
    if (rd.as_doubles(key, v, tmp)) {
      c.layers.clear();
      for (double s : tmp) {
        if (s < 1 || s != std::floor(s)) {
          rd.problems.push_back(key + ": layer sizes must be positive integers");
          break;
        }
        c.layers.push_back(static_cast<std::size_t>(s));
      }
    }
  } else if (key == "network.output") {
    rd.as_enum<Activation>(key, v, {{"sigmoid", Activation::Sigmoid}, {"identity", Activation::Identity}}, c.output);
  } else if (key == "network.init_scale") {
    if (rd.as_double(key, v, d)) c.init_scale = d;
  } else if (key == "loss.kind") {
    if (v == "lyapunov" || v == "l1" || v == "l2") c.loss = v;
    else rd.problems.push_back(key + ": expected lyapunov|l1|l2, got '" + v + "'");
  } else if (key == "loss.alpha") {
    if (rd.as_double(key, v, d)) c.alpha = d;
  } else if (key == "loss.beta") {
    if (v == "auto") c.beta.reset();
    else if (rd.as_double(key, v, d)) c.beta = d;
  } else if (key == "control.law") {
    rd.as_enum<ControlLaw>(key, v,
                           {{"auto", ControlLaw::Auto},
                            {"single-neuron", ControlLaw::SingleNeuron},
                            {"multilayer", ControlLaw::Multilayer}},
                           c.law);
  } else if (key == "gains.k") {
    if (rd.as_double(key, v, d)) c.k = d;
  } else if (key == "integrator.method") {
    rd.as_enum<Method>(key, v, {{"rk4", Method::Rk4}, {"euler", Method::Euler}}, c.method);
  } else if (key == "integrator.dt") {
    if (v == "auto") c.dt.reset();
    else if (rd.as_double(key, v, d)) c.dt = d;
  } else if (key == "integrator.t_max") {
    if (v == "auto") c.t_max.reset();
    else if (rd.as_double(key, v, d)) c.t_max = d;
  } else if (key == "integrator.step_budget") {
    if (rd.as_size(key, v, n)) c.step_budget = n;
  } else if (key == "integrator.record_stride") {
    if (rd.as_size(key, v, n)) c.record_stride = n;
  } else if (key == "stop.epsilon") {
    if (rd.as_double(key, v, d)) c.epsilon = d;
  } else if (key == "train.mode") {
    rd.as_enum<ModeKind>(key, v, {{"theory", ModeKind::Theory}, {"epoch", ModeKind::Epoch}}, c.mode);
  } else if (key == "train.epochs") {
    if (rd.as_size(key, v, n)) c.epochs = n;
  } else if (key == "train.shuffle") {
    rd.as_bool(key, v, c.shuffle);
  } else if (key == "data.source") {
    rd.as_enum<DataSource>(key, v,
                           {{"inline", DataSource::Inline},
                            {"csv", DataSource::Csv},
                            {"blobs", DataSource::Blobs},
                            {"linreg", DataSource::Linreg}},
                           c.data.source);
  } else if (key == "data.path") {
    c.data.path = v;
  } else if (key == "data.features") {
    c.data.features = detail::split_list(v);
  } else if (key == "data.targets") {
    c.data.targets = detail::split_list(v);
  } else if (key == "data.label_column") {
    c.data.label_column = v;
  } else if (key == "data.label_negative") {
    c.data.label_negative = v;
  } else if (key == "data.label_positive") {
    c.data.label_positive = v;
  } else if (key == "data.normalize") {
    rd.as_enum<Normalization>(key, v, {{"minmax", Normalization::MinMaxUnit}, {"none", Normalization::None}},
                              c.data.normalization);
  } else if (key == "data.split") {
    rd.as_bool(key, v, c.data.split);
  } else if (key == "data.per_class") {
    if (rd.as_size(key, v, n)) c.data.per_class = n;
  } else if (key == "data.separation") {
    if (rd.as_double(key, v, d)) c.data.separation = d;
  } else if (key == "data.dims") {
    if (rd.as_size(key, v, n)) c.data.dims = n;
  } else if (key == "data.count") {
    if (rd.as_size(key, v, n)) c.data.count = n;
  } else if (key == "data.noise_sd") {
    if (rd.as_double(key, v, d)) c.data.noise_sd = d;
  } else if (key == "data.coeffs") {
    rd.as_doubles(key, v, c.data.coeffs);
  } else if (key == "data.x") {
    rd.as_doubles(key, v, c.data.x);
  } else if (key == "data.y") {
    rd.as_doubles(key, v, c.data.y);
  } else if (key == "data.sample") {
    if (rd.as_size(key, v, n)) c.data.sample_index = n;
  } else if (key == "bound.gamma") {
    if (v == "auto" || v == "bias" || v == "data" || parse_double(v, d)) c.gamma = v;
    else rd.problems.push_back(key + ": expected auto|bias|data|<number>, got '" + v + "'");
  } else if (key == "bound.E0") {
    if (v == "auto") c.bound_E0.reset();
    else if (rd.as_double(key, v, d)) c.bound_E0 = d;
  } else if (key == "perturb.mode") {
    if (v == "none") c.perturb = false;
    else if (rd.as_enum<PerturbMode>(key, v, {{"vanishing", PerturbMode::Vanishing}, {"amplitude", PerturbMode::Amplitude}},
                                     c.perturb_mode))
      c.perturb = true;
  } else if (key == "perturb.M") {
    if (rd.as_double(key, v, d)) c.perturb_M = d;
  } else if (key == "perturb.alpha") {
    if (v == "auto") c.perturb_alpha.reset();
    else if (rd.as_double(key, v, d)) c.perturb_alpha = d;
  } else if (key == "perturb.hold_steps") {
    if (rd.as_size(key, v, n)) c.perturb_hold = n;
  } else if (key == "sweep.M") {
    rd.as_doubles(key, v, c.sweep_M);
  } else if (key == "sweep.alpha") {
    rd.as_doubles(key, v, c.sweep_alpha);
  } else if (key == "sweep.k") {
    rd.as_doubles(key, v, c.sweep_k);
  } else if (key == "compare.threshold") {
    if (rd.as_double(key, v, d)) c.compare_threshold = d;
  } else if (key == "gradcheck.h") {
    if (rd.as_double(key, v, d)) c.gradcheck_h = d;
  } else if (key == "seed") {
    if (rd.as_size(key, v, n)) c.seed = n;
  } else if (key == "output.dir") {
    c.out_dir = v;
  } else if (key == "output.svg") {
    rd.as_bool(key, v, c.svg);
  } else if (key == "output.log_y") {
    rd.as_bool(key, v, c.log_y);
  } else if (key == "unsafe_alpha") {
    rd.as_bool(key, v, c.unsafe_alpha);
  } else {
    rd.problems.push_back("unknown key '" + key + "'");
  }
}

/// Semantic checks. Returns every problem found, empty when valid.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  if (c.layers.size() < 2) p.push_back("network.layers: need at least input and output sizes");
  if (!(c.init_scale > 0.0)) p.push_back("network.init_scale: must be positive");
  if (!(c.k > 0.0)) p.push_back("gains.k: k_min must be positive");
  if (c.alpha == 0.0) {
    if (!c.unsafe_alpha) p.push_back("loss.alpha: alpha = 0 requires --unsafe-alpha");
  } else if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
    p.push_back("loss.alpha: must lie in (0, 1)");
  }
  if (c.beta && !(*c.beta > 0.0 && *c.beta < 1.0)) p.push_back("loss.beta: must lie in (0, 1)");
  if (c.beta && !(c.alpha + *c.beta < 1.0)) p.push_back("loss.beta: multilayer law needs alpha + beta < 1");
  if (c.dt && !(*c.dt > 0.0)) p.push_back("integrator.dt: must be positive");
  if (c.t_max && !(*c.t_max > 0.0)) p.push_back("integrator.t_max: must be positive");
  if (c.dt && c.t_max && *c.t_max / *c.dt > static_cast<double>(c.step_budget))
    p.push_back("integrator: t_max/dt exceeds integrator.step_budget");
  if (c.record_stride && *c.record_stride == 0) p.push_back("integrator.record_stride: must be at least 1");
  if (!(c.epsilon > 0.0)) p.push_back("stop.epsilon: must be positive");
  if (c.mode == ModeKind::Epoch && c.epochs == 0) p.push_back("train.epochs: must be at least 1");
  if (c.law == ControlLaw::SingleNeuron && !(c.layers.size() == 2 && c.layers[1] == 1 && c.output == Activation::Sigmoid))
    p.push_back("control.law: single-neuron law needs network.layers = n,1 with sigmoid output");
  switch (c.data.source) {
    case DataSource::Inline:
      if (c.data.x.empty()) p.push_back("data.x: inline source needs an input vector");
      if (c.data.y.empty()) p.push_back("data.y: inline source needs a target vector");
      if (!c.layers.empty() && !c.data.x.empty() && c.data.x.size() != c.layers.front())
        p.push_back("data.x: length differs from the network input size");
      if (!c.layers.empty() && !c.data.y.empty() && c.data.y.size() != c.layers.back())
        p.push_back("data.y: length differs from the network output size");
      if (c.mode == ModeKind::Epoch) p.push_back("train.mode: epoch flow needs a dataset, not an inline sample");
      break;
    case DataSource::Csv:
      if (c.data.path.empty()) p.push_back("data.path: csv source needs a path");
      if (c.data.features.empty()) p.push_back("data.features: csv source needs feature columns");
      if (c.data.targets.empty() && c.data.label_column.empty())
        p.push_back("data.targets: csv source needs target columns or data.label_column");
      if (!c.data.label_column.empty() && (c.data.label_negative.empty() || c.data.label_positive.empty()))
        p.push_back("data.label_column: needs data.label_negative and data.label_positive");
      if (!c.layers.empty() && !c.data.features.empty() && c.data.features.size() != c.layers.front())
        p.push_back("data.features: count differs from the network input size");
      break;
    case DataSource::Blobs:
      if (c.data.per_class == 0) p.push_back("data.per_class: must be positive");
      if (c.data.dims == 0) p.push_back("data.dims: must be positive");
      if (!c.layers.empty() && c.layers.front() != c.data.dims) p.push_back("data.dims: differs from the network input size");
      if (!c.layers.empty() && c.layers.back() != 1) p.push_back("network.layers: blobs have one target");
      break;
    case DataSource::Linreg:
      if (c.data.count == 0) p.push_back("data.count: must be positive");
      if (c.data.coeffs.empty()) p.push_back("data.coeffs: must not be empty");
      if (c.data.noise_sd < 0.0) p.push_back("data.noise_sd: must be non-negative");
      if (!c.layers.empty() && c.layers.front() != c.data.coeffs.size())
        p.push_back("data.coeffs: count differs from the network input size");
      if (!c.layers.empty() && c.layers.back() != 1) p.push_back("network.layers: linreg has one target");
      break;
  }
  if (c.perturb) {
    if (!(c.perturb_M >= 0.0)) p.push_back("perturb.M: must be non-negative");
    if (c.perturb_hold == 0) p.push_back("perturb.hold_steps: must be at least 1");
  }
  for (double m : c.sweep_M)
    if (!(m >= 0.0)) p.push_back("sweep.M: entries must be non-negative");
  for (double a : c.sweep_alpha) {
    if (a == 0.0 && !c.unsafe_alpha) p.push_back("sweep.alpha: alpha = 0 requires --unsafe-alpha");
    else if (a != 0.0 && !(a > 0.0 && a < 1.0)) p.push_back("sweep.alpha: entries must lie in (0, 1)");
  }
  for (double k : c.sweep_k)
    if (!(k > 0.0)) p.push_back("sweep.k: gains must be positive");
  if (c.gamma != "auto" && c.gamma != "bias" && c.gamma != "data") {
    double g = 0.0;
    if (!parse_double(c.gamma, g) || !(g > 0.0)) p.push_back("bound.gamma: must be positive");
  }
  if (c.bound_E0 && !(*c.bound_E0 > 0.0)) p.push_back("bound.E0: must be positive");
  if (!(c.compare_threshold > 0.0)) p.push_back("compare.threshold: must be positive");
  if (!(c.gradcheck_h > 0.0)) p.push_back("gradcheck.h: must be positive");
  return p;
}

/// Parses `key = value` lines ('#' starts a comment). Unknown keys, bad
/// values and semantic problems are all collected into one ConfigError.
inline ExperimentConfig parse_config(std::istream& in, const std::map<std::string, std::string>& overrides = {}) {
  ExperimentConfig c;
  detail::ConfigReader rd;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      rd.problems.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) {
      rd.problems.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    apply_config_key(c, key, value, rd);
  }
  for (const auto& [k, v] : overrides) apply_config_key(c, k, v, rd);
  auto semantic = validate_config(c);
  rd.problems.insert(rd.problems.end(), semantic.begin(), semantic.end());
  if (!rd.problems.empty()) throw ConfigError(rd.problems);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::map<std::string, std::string>& overrides = {}) {
  std::istringstream is(text);
  return parse_config(is, overrides);
}

inline ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  return parse_config(in, overrides);
}

}  // namespace ftnn
