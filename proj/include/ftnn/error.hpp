#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ftnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a value was violated (negative loss, bad exponent, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The operation requires a different network topology or control law.
class ModeError : public Error {
 public:
  using Error::Error;
};

/// An input assumption needed by a guarantee does not hold for the data.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

/// No settling-time guarantee exists for the requested parameters.
class GuaranteeError : public Error {
 public:
  using Error::Error;
};

/// The integrated state stopped being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(double t, const std::string& what)
      : Error(what + " at t=" + std::to_string(t)), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

/// The requested horizon needs more steps than the configured budget.
class HorizonError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened or written.
class IoError : public Error {
 public:
  explicit IoError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// CSV file has no header or no data rows.
class EmptyFileError : public Error {
 public:
  using Error::Error;
};

/// A column named by the schema is not present in the header.
class MissingColumnError : public Error {
 public:
  explicit MissingColumnError(std::string column)
      : Error("missing column '" + column + "'"), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A cell failed to parse. Row numbers are 1-based file lines (header = 1).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// Configuration problems, collected exhaustively before reporting.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& p : items) out += "\n  - " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace ftnn
