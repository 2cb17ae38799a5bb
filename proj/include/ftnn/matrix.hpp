#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ftnn/error.hpp"

namespace ftnn {

/// Dense row-major matrix of doubles. Just enough for small MLPs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One matrix per weight layer. Used for weights, gradients, rates and gains.
using WeightSet = std::vector<Matrix>;

inline WeightSet zeros_like(const WeightSet& ws) {
  WeightSet out;
  out.reserve(ws.size());
  for (const auto& m : ws) out.emplace_back(m.rows(), m.cols());
  return out;
}

inline bool same_shape(const WeightSet& a, const WeightSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t l = 0; l < a.size(); ++l)
    if (!a[l].same_shape(b[l])) return false;
  return true;
}

inline void require_same_shape(const WeightSet& a, const WeightSet& b, const char* where) {
  if (!same_shape(a, b)) throw ShapeError(std::string(where) + ": weight-set shapes differ");
}

/// y += scale * x
inline void axpy(WeightSet& y, double scale, const WeightSet& x) {
  require_same_shape(y, x, "axpy");
  for (std::size_t l = 0; l < y.size(); ++l) {
    auto dst = y[l].values();
    auto src = x[l].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

/// Sum over all entries of a[k] * b[k].
inline double inner(const WeightSet& a, const WeightSet& b) {
  require_same_shape(a, b, "inner");
  double acc = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    auto x = a[l].values();
    auto y = b[l].values();
    for (std::size_t k = 0; k < x.size(); ++k) acc += x[k] * y[k];
  }
  return acc;
}

inline double norm2(const WeightSet& ws) { return std::sqrt(inner(ws, ws)); }

inline bool all_finite(const WeightSet& ws) {
  for (const auto& m : ws)
    for (double v : m.values())
      if (!std::isfinite(v)) return false;
  return true;
}

inline std::size_t entry_count(const WeightSet& ws) {
  std::size_t n = 0;
  for (const auto& m : ws) n += m.size();
  return n;
}

}  // namespace ftnn
