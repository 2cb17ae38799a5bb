#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ftnn/error.hpp"
#include "ftnn/format.hpp"

namespace ftnn {

struct FeatureStats {
  std::vector<double> min;
  std::vector<double> max;
  double input_bound = 0.0;  ///< a = max over samples and features of |x_i|
};

/// Paired inputs and targets. Treated as immutable once built.
struct Dataset {
  std::string name;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  FeatureStats stats;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return inputs.size(); }
  std::size_t input_size() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
  std::size_t output_size() const noexcept { return targets.empty() ? 0 : targets.front().size(); }
};

inline FeatureStats compute_stats(const std::vector<std::vector<double>>& inputs) {
  FeatureStats st;
  if (inputs.empty()) return st;
  const std::size_t n = inputs.front().size();
  st.min.assign(n, std::numeric_limits<double>::infinity());
  st.max.assign(n, -std::numeric_limits<double>::infinity());
  for (const auto& x : inputs)
    for (std::size_t i = 0; i < n; ++i) {
      st.min[i] = std::min(st.min[i], x[i]);
      st.max[i] = std::max(st.max[i], x[i]);
      st.input_bound = std::max(st.input_bound, std::abs(x[i]));
    }
  return st;
}

/// Checks equal lengths, consistent widths and finiteness, then fills stats.
inline Dataset make_dataset(std::string name, std::vector<std::vector<double>> inputs,
                            std::vector<std::vector<double>> targets) {
  if (inputs.size() != targets.size()) throw ShapeError("dataset: inputs and targets differ in length");
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    if (inputs[r].size() != inputs.front().size() || targets[r].size() != targets.front().size())
      throw ShapeError("dataset: ragged rows");
    for (double v : inputs[r])
      if (!std::isfinite(v)) throw ContractError("dataset: non-finite input");
    for (double v : targets[r])
      if (!std::isfinite(v)) throw ContractError("dataset: non-finite target");
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.inputs = std::move(inputs);
  ds.targets = std::move(targets);
  ds.stats = compute_stats(ds.inputs);
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

/// Which columns feed the network. `labels` optionally turns one text column
/// into a numeric target; rows whose label is not in the map are dropped.
struct CsvSchema {
  std::vector<std::string> features;
  std::vector<std::string> targets;
  struct LabelMap {
    std::string column;
    std::map<std::string, double> values;
  };
  std::optional<LabelMap> labels;
};

namespace detail {

// RFC 4180 record splitter. Quoted fields may contain commas and "" escapes;
// embedded newlines are not supported.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw MissingColumnError(name);
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const CsvSchema& schema, std::string name = "csv") {
  if (schema.features.empty()) throw ContractError("csv schema names no feature columns");
  if (schema.targets.empty() && !schema.labels) throw ContractError("csv schema names no target columns");

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      for (auto& h : detail::split_csv_line(line)) header.emplace_back(trim(h));
      break;
    }
  }
  if (header.empty()) throw EmptyFileError("csv file is empty");

  std::vector<std::size_t> fcols, tcols;
  for (const auto& f : schema.features) fcols.push_back(detail::column_index(header, f));
  for (const auto& t : schema.targets) tcols.push_back(detail::column_index(header, t));
  std::optional<std::size_t> lcol;
  if (schema.labels) lcol = detail::column_index(header, schema.labels->column);

  std::vector<std::vector<double>> xs, ys;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::size_t col) -> const std::string& {
      if (col >= cells.size()) throw ParseError(lineno, header[col], "row has too few cells");
      return cells[col];
    };
    std::vector<double> y;
    if (lcol) {
      const std::string label(trim(cell(*lcol)));
      auto it = schema.labels->values.find(label);
      if (it == schema.labels->values.end()) continue;
      y.push_back(it->second);
    }
    std::vector<double> x;
    for (auto c : fcols) {
      double v;
      if (!parse_double(cell(c), v)) throw ParseError(lineno, header[c], "not a finite number: '" + cell(c) + "'");
      x.push_back(v);
    }
    for (auto c : tcols) {
      double v;
      if (trim(cell(c)).empty()) throw ParseError(lineno, header[c], "blank target cell");
      if (!parse_double(cell(c), v)) throw ParseError(lineno, header[c], "not a finite number: '" + cell(c) + "'");
      y.push_back(v);
    }
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  if (xs.empty()) throw EmptyFileError("csv file has a header but no data rows");
  return make_dataset(std::move(name), std::move(xs), std::move(ys));
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open dataset file");
  return parse_csv(in, schema, path);
}

/// Writes features then targets with round-trip precision.
inline void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& feature_names,
                      const std::vector<std::string>& target_names) {
  if (feature_names.size() != ds.input_size() || target_names.size() != ds.output_size())
    throw ShapeError("write_csv: column names do not match dataset widths");
  bool first = true;
  for (const auto& n : feature_names) out << (first ? "" : ",") << n, first = false;
  for (const auto& n : target_names) out << "," << n;
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    first = true;
    for (double v : ds.inputs[r]) out << (first ? "" : ",") << format_double(v), first = false;
    for (double v : ds.targets[r]) out << "," << format_double(v);
    out << '\n';
  }
}

/// Default column names x1..xn, y1..ym.
inline CsvSchema default_schema(const Dataset& ds) {
  CsvSchema s;
  for (std::size_t i = 0; i < ds.input_size(); ++i) s.features.push_back("x" + std::to_string(i + 1));
  for (std::size_t i = 0; i < ds.output_size(); ++i) s.targets.push_back("y" + std::to_string(i + 1));
  return s;
}

inline void save_csv(const std::string& path, const Dataset& ds, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot write dataset file");
  write_csv(out, ds, schema.features, schema.targets);
}

/// Key-value sidecar with per-feature ranges and the input bound.
inline void write_stats_kv(std::ostream& out, const Dataset& ds) {
  out << "name = " << ds.name << '\n';
  out << "samples = " << ds.size() << '\n';
  out << "inputs = " << ds.input_size() << '\n';
  out << "outputs = " << ds.output_size() << '\n';
  out << "input_bound = " << format_double(ds.stats.input_bound) << '\n';
  for (std::size_t i = 0; i < ds.stats.min.size(); ++i) {
    out << "feature." << i + 1 << ".min = " << format_double(ds.stats.min[i]) << '\n';
    out << "feature." << i + 1 << ".max = " << format_double(ds.stats.max[i]) << '\n';
  }
  for (const auto& w : ds.warnings) out << "warning = " << w << '\n';
}

// ---------------------------------------------------------------------------
// Transformations

enum class Normalization { None, MinMaxUnit };

/// Affine map of each feature onto [0, 1]. Constant features become 0 and
/// leave a warning.
inline Dataset normalize(const Dataset& ds, Normalization mode) {
  if (mode == Normalization::None || ds.size() == 0) return ds;
  Dataset out = ds;
  const auto& st = ds.stats;
  for (std::size_t i = 0; i < ds.input_size(); ++i) {
    const double lo = st.min[i];
    const double span = st.max[i] - lo;
    if (span == 0.0) {
      out.warnings.push_back("feature " + std::to_string(i + 1) + " is constant; mapped to 0");
      for (auto& x : out.inputs) x[i] = 0.0;
    } else {
      for (auto& x : out.inputs) x[i] = (x[i] - lo) / span;
    }
  }
  out.stats = compute_stats(out.inputs);
  return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx, const std::string& suffix) {
  std::vector<std::vector<double>> xs, ys;
  xs.reserve(idx.size());
  ys.reserve(idx.size());
  for (auto k : idx) {
    xs.push_back(ds.inputs.at(k));
    ys.push_back(ds.targets.at(k));
  }
  Dataset out = make_dataset(ds.name + suffix, std::move(xs), std::move(ys));
  out.warnings = ds.warnings;
  return out;
}

/// Seeded shuffle, then ceil(0.8 N) training rows and the rest for testing.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, std::uint64_t seed, double train_fraction = 0.8) {
  if (ds.size() < 5) throw ContractError("split needs at least 5 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 gen(seed);
  std::shuffle(idx.begin(), idx.end(), gen);
  auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(ds.size()) - 1e-9));
  n_train = std::min(n_train, ds.size() - 1);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {subset(ds, train, "/train"), subset(ds, test, "/test")};
}

// ---------------------------------------------------------------------------
// Synthetic stand-ins

/// Two unit-variance Gaussian clusters in `dims` dimensions, centred at
/// -separation/2 (target 0) and +separation/2 (target 1) in every coordinate.
/// Samples alternate between the classes.
inline Dataset gen_blobs(std::uint64_t seed, std::size_t per_class, double separation, std::size_t dims = 4) {
  if (per_class == 0 || dims == 0) throw ContractError("gen_blobs needs positive counts");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> xs, ys;
  for (std::size_t s = 0; s < per_class; ++s)
    for (int cls = 0; cls < 2; ++cls) {
      const double centre = (cls == 0 ? -0.5 : 0.5) * separation;
      std::vector<double> x(dims);
      for (auto& v : x) v = centre + noise(gen);
      xs.push_back(std::move(x));
      ys.push_back({static_cast<double>(cls)});
    }
  return make_dataset("blobs", std::move(xs), std::move(ys));
}

/// x uniform in [0,1]^n, y = coeffs . x + N(0, noise_sd^2).
inline Dataset gen_linreg(std::uint64_t seed, std::size_t count, double noise_sd, const std::vector<double>& coeffs) {
  if (count == 0 || coeffs.empty()) throw ContractError("gen_linreg needs positive counts");
  if (noise_sd < 0.0) throw ContractError("noise_sd must be non-negative");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> xs, ys;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> x(coeffs.size());
    double y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = unit(gen);
      y += coeffs[i] * x[i];
    }
    if (noise_sd > 0.0) y += noise_sd * noise(gen);
    xs.push_back(std::move(x));
    ys.push_back({y});
  }
  return make_dataset("linreg", std::move(xs), std::move(ys));
}

}  // namespace ftnn
