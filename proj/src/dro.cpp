#include "dora/dro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dora {

namespace {

void check_batch(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg) {
  if (losses.empty()) throw ConfigError("aggregate: empty batch");
  if (calib.size() != losses.size()) {
    throw ConfigError("aggregate: " + std::to_string(losses.size()) + " losses but " +
                      std::to_string(calib.size()) + " calibration values");
  }
  if (agg.robust() && !(agg.lambda > 0.0 && std::isfinite(agg.lambda))) {
    throw ConfigError("aggregate: lambda must be positive for robust aggregators");
  }
}

// Per-sample exponent argument of the aggregator (before division by λ).
std::vector<double> scores(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg) {
  std::vector<double> s(losses.begin(), losses.end());
  if (agg.calibrated()) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= calib[i];
  }
  return s;
}

void check_distribution(std::span<const double> losses, std::span<const double> p, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("KL budget rho must be a finite value >= 0");
  if (losses.empty() || losses.size() != p.size()) {
    throw ConfigError("losses and base weights must be nonempty and of equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) throw ConfigError("base weights must be nonnegative");
    if (!std::isfinite(losses[i])) throw NumericError("losses must be finite");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("base weights must sum to 1");
}

struct Moments {
  double mean = 0.0;  // p-weighted mean of u
  double max = -std::numeric_limits<double>::infinity();
  double min = std::numeric_limits<double>::infinity();
  double max_mass = 0.0;  // p mass on argmax u
};

Moments moments(std::span<const double> u, std::span<const double> p) {
  Moments m;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] <= 0.0) continue;
    m.mean += p[i] * u[i];
    m.max = std::max(m.max, u[i]);
    m.min = std::min(m.min, u[i]);
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] > 0.0 && u[i] == m.max) m.max_mass += p[i];
  }
  return m;
}

}  // namespace

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kErm: return "erm";
    case AggregatorKind::kDro: return "dro";
    case AggregatorKind::kReweight: return "reweight";
    case AggregatorKind::kDora: return "dora";
  }
  return "?";
}

AggregatorKind parse_aggregator_kind(std::string_view name) {
  for (AggregatorKind k : {AggregatorKind::kErm, AggregatorKind::kDro, AggregatorKind::kReweight, AggregatorKind::kDora}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown aggregator '" + std::string(name) + "'");
}

double log_mean_exp(std::span<const double> p, std::span<const double> v) {
  double center = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (p[i] > 0.0) center += p[i] * v[i];
  }
  double spread = 0.0;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (p[i] <= 0.0) continue;
    spread = std::max(spread, std::abs(v[i] - center));
    top = std::max(top, v[i] - center);
  }
  double acc = 0.0;
  if (spread <= 0.5) {
    // Near-constant arguments: log1p/expm1 keep the O(spread²) result accurate.
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (p[i] > 0.0) acc += p[i] * std::expm1(v[i] - center);
    }
    return center + std::log1p(acc);
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::exp(v[i] - center - top);
  }
  return center + top + std::log(acc);
}

double aggregate(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg) {
  check_batch(losses, calib, agg);
  const std::vector<double> s = scores(losses, calib, agg);
  const double n = static_cast<double>(s.size());
  if (!agg.robust()) {
    double sum = 0.0;
    for (double v : s) sum += v;
    return sum / n;
  }
  const std::vector<double> p(s.size(), 1.0 / n);
  std::vector<double> scaled(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) scaled[i] = s[i] / agg.lambda;
  return agg.lambda * log_mean_exp(p, scaled);
}

AggregateWeights aggregate_weights(std::span<const double> losses, std::span<const double> calib,
                                   const Aggregator& agg) {
  check_batch(losses, calib, agg);
  const std::size_t n = losses.size();
  AggregateWeights w;
  w.omega.assign(n, 1.0 / static_cast<double>(n));
  if (agg.robust()) {
    const std::vector<double> s = scores(losses, calib, agg);
    const double top = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w.omega[i] = std::exp((s[i] - top) / agg.lambda);
      sum += w.omega[i];
    }
    for (double& o : w.omega) o /= sum;
  }
  w.coeff = w.omega;
  if (agg.calibrated()) {
    for (std::size_t i = 0; i < n; ++i) w.coeff[i] *= calib[i];
  }
  return w;
}

Table aggregate_grad(const std::vector<LossValue>& losses, std::span<const double> calib,
                     const Aggregator& agg, std::size_t query_count) {
  std::vector<double> u(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) u[i] = losses[i].value;
  const AggregateWeights w = aggregate_weights(u, calib, agg);
  const std::size_t cols = losses.front().grad_row.size();
  Table grad(query_count, cols, 0.0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    auto row = grad.row(losses[i].query);
    for (std::size_t y = 0; y < cols; ++y) row[y] += w.coeff[i] * losses[i].grad_row[y];
  }
  return grad;
}

double tilted_kl(std::span<const double> u, std::span<const double> p, double eta) {
  const Moments m = moments(u, p);
  if (eta * (m.max - m.min) <= 1.0) {
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = eta * (u[i] - m.mean);
    const double log_z = log_mean_exp(p, v);
    // Σ q_i d_i written as Σ p_i d_i expm1(η d_i - log Z) to avoid cancellation at small η.
    double tilted_mean = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (p[i] > 0.0) tilted_mean += p[i] * (u[i] - m.mean) * std::expm1(v[i] - log_z);
    }
    return std::max(0.0, eta * tilted_mean - log_z);
  }
  // Large η: Σ q log(q/p) with exponents centered at the max, so every term that carries weight
  // is O(1) and η never multiplies an accumulated rounding error.
  std::vector<double> w(u.size());
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    w[i] = eta * (u[i] - m.max);
    if (p[i] > 0.0) z += p[i] * std::exp(w[i]);
  }
  const double log_z = std::log(z);
  double kl = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::exp(w[i] - log_z) * (w[i] - log_z);
  }
  return std::max(0.0, kl);
}

WorstCaseSolution worst_case_oracle(std::span<const double> u, std::span<const double> p, double rho) {
  check_distribution(u, p, rho);
  const Moments m = moments(u, p);
  const std::size_t n = u.size();
  WorstCaseSolution sol;

  auto fill_tilted = [&](double eta) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = eta * (u[i] - m.mean);
    const double log_z = log_mean_exp(p, v);
    sol.weights.assign(n, 0.0);
    double shift_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] <= 0.0) continue;
      sol.weights[i] = p[i] * std::exp(v[i] - log_z);
      shift_mean += p[i] * (u[i] - m.mean) * std::expm1(v[i] - log_z);
    }
    sol.tilt = eta;
    sol.value = m.mean + shift_mean;
    sol.kl = tilted_kl(u, p, eta);
    sol.normalizer = std::exp(log_z + eta * (m.mean - m.max));
  };

  if (rho == 0.0 || m.max == m.min) {
    fill_tilted(0.0);
    return sol;
  }
  const double kl_max = -std::log(m.max_mass);
  if (rho >= kl_max) {
    sol.weights.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] > 0.0 && u[i] == m.max) sol.weights[i] = p[i] / m.max_mass;
    }
    sol.tilt = std::numeric_limits<double>::infinity();
    sol.kl = kl_max;
    sol.value = m.max;
    sol.normalizer = m.max_mass;
    sol.boundary = true;
    return sol;
  }

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > 0.0) scale = std::max(scale, std::abs(u[i]));
  }
  double lo = 0.0;
  double hi = 700.0 / scale;
  while (tilted_kl(u, p, hi) < rho) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) {
      fill_tilted(lo);
      sol.boundary = true;
      return sol;
    }
  }
  double eta = 0.5 * (lo + hi);
  for (int iter = 0; iter < 4000; ++iter) {
    eta = 0.5 * (lo + hi);
    const double kl = tilted_kl(u, p, eta);
    if (std::abs(kl - rho) <= 1e-12) break;
    if (kl < rho) {
      lo = eta;
    } else {
      hi = eta;
    }
    if (!(hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi)) break;
  }
  fill_tilted(eta);
  return sol;
}

double dual_objective(std::span<const double> u, std::span<const double> p, double rho, double lambda) {
  const Moments m = moments(u, p);
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) v[i] = (u[i] - m.mean) / lambda;
  return m.mean + lambda * log_mean_exp(p, v) + lambda * rho;
}

double dual_risk(std::span<const double> u, std::span<const double> p, double rho) {
  check_distribution(u, p, rho);
  const Moments m = moments(u, p);
  if (rho == 0.0 || m.max == m.min) return m.mean;

  auto g = [&](double t) { return dual_objective(u, p, rho, std::exp(t)); };
  constexpr double kLow = -40.0;
  constexpr double kHigh = 40.0;
  constexpr double kStep = 0.5;
  const int steps = static_cast<int>((kHigh - kLow) / kStep);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= steps; ++k) {
    const double val = g(kLow + kStep * k);
    if (!std::isfinite(val)) {
      throw NumericError("dual_risk: bracketing failed, non-finite objective at log(lambda) = " +
                         format_double(kLow + kStep * k) + " while scanning [" + format_double(kLow) +
                         ", " + format_double(kHigh) + "]");
    }
    if (val < best_val) {
      best_val = val;
      best = k;
    }
  }
  if (best == 0) {
    // λ → 0⁺: the infimum is approached at the boundary and equals max u once ρ covers the max support.
    return std::min(best_val, rho >= -std::log(m.max_mass) ? m.max : best_val);
  }
  if (best == steps) return best_val;

  double a = kLow + kStep * (best - 1);
  double b = kLow + kStep * (best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double gc = g(c);
  double gd = g(d);
  while (b - a > 1e-13) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
  }
  return std::min({best_val, gc, gd});
}

}  // namespace dora
