#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace masga {

/// A chain produced a non-finite value or left the |x| <= 1e8 box.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t step, std::string chain, const std::string& what)
      : std::runtime_error(what), step_(step), chain_(std::move(chain)) {}

  std::uint64_t step() const { return step_; }
  const std::string& chain() const { return chain_; }

 private:
  std::uint64_t step_;
  std::string chain_;
};

class RangeError : public std::out_of_range {
  using std::out_of_range::out_of_range;
};

class DimensionError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class AllocationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class LevelCapError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ComplexityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : std::runtime_error(what), row_(row), column_(column) {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class TargetError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace masga
