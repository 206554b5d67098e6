#include "dora/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace dora {

Table::Table(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ConfigError("table data has " + std::to_string(data_.size()) + " entries, expected " +
                      std::to_string(rows * cols));
  }
}

void require_stochastic(const Table& t, std::string_view what, double tol) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double sum = 0.0;
    for (double v : t.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(what) + ": row " + std::to_string(r) +
                          " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ConfigError(std::string(what) + ": row " + std::to_string(r) + " sums to " +
                        format_double(sum));
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("malformed decimal string '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {
std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream) {
  return mix64(mix64(parent) ^ fnv1a(stream));
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(mix64(parent) + mix64(index ^ 0x5851f42d4c957f2dULL));
}

std::size_t sample_categorical(std::span<const double> weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw NumericError("categorical draw from an all-zero weight vector");
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

}  // namespace dora
