#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dora {

// Error hierarchy. The CLI maps these onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (exit code 2 at the CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numeric state (exit code 3 at the CLI).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Dense row-major table of doubles indexed (row, column).
class Table {
 public:
  Table() = default;
  Table(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Table(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Table&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws ConfigError unless every row is nonnegative and sums to 1 within tol.
void require_stochastic(const Table& t, std::string_view what, double tol = 1e-12);

// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);
// Inverse of format_double; throws ConfigError on malformed input.
double parse_double(std::string_view s);

// splitmix64 finalizer; the basis of the seed-splitting scheme.
std::uint64_t mix64(std::uint64_t x);
// Derives an independent stream seed from a parent seed and a stream label.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

// Inverse-CDF draw from a (possibly unnormalized) nonnegative weight vector.
std::size_t sample_categorical(std::span<const double> weights, std::mt19937_64& rng);

// 64-bit FNV-1a over bytes, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace dora
