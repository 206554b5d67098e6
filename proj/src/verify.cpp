#include "dora/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dora/io.hpp"

namespace dora {

namespace {

std::vector<double> dirichlet_ones(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& v : w) {
    v = e(rng) + 1e-12;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

PreferenceDatum random_datum(std::size_t X, std::size_t Y, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> qx(0, X - 1);
  std::uniform_int_distribution<std::size_t> qy(0, Y - 1);
  std::uniform_real_distribution<double> r(-3.0, 0.0);
  PreferenceDatum d;
  d.query = qx(rng);
  for (std::size_t j = 0; j < n; ++j) {
    d.responses.push_back(qy(rng));
    d.source_labels.push_back(j % 2 == 0 ? 1 : 0);
    d.rewards.push_back(r(rng));
  }
  d.ranking = rank_by_rewards(d.rewards);
  return d;
}

Table random_logits(std::size_t X, std::size_t Y, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Table t(X, Y);
  for (double& v : t.values()) v = g(rng);
  return t;
}

// Central differences of f over every entry of theta.
std::vector<double> finite_difference(const std::function<double(const Table&)>& f, const Table& theta,
                                      double step = 1e-5) {
  std::vector<double> out(theta.values().size());
  Table probe = theta;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double keep = probe.values()[i];
    probe.values()[i] = keep + step;
    const double up = f(probe);
    probe.values()[i] = keep - step;
    const double down = f(probe);
    probe.values()[i] = keep;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

}  // namespace

DroInstance random_dro_instance(std::mt19937_64& rng, std::size_t max_n, double max_abs, double max_rho) {
  std::uniform_int_distribution<std::size_t> size(1, max_n);
  std::uniform_real_distribution<double> loss(-max_abs, max_abs);
  std::uniform_real_distribution<double> budget(0.0, max_rho);
  std::uniform_int_distribution<int> kind(0, 2);
  DroInstance inst;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) inst.losses.push_back(loss(rng));
  if (n > 2 && kind(rng) == 0) inst.losses[1] = inst.losses[0];  // repeated values, ties at the max
  inst.base = kind(rng) == 0 ? std::vector<double>(n, 1.0 / static_cast<double>(n)) : dirichlet_ones(n, rng);
  inst.rho = budget(rng);
  return inst;
}

std::pair<double, double> tilt_identity_error(const DroInstance& inst, const WorstCaseSolution& sol) {
  const auto& u = inst.losses;
  const auto& p = inst.base;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] > 0.0) top = std::max(top, u[i]);
  }
  std::vector<double> expected(u.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (std::isinf(sol.tilt)) {
      expected[i] = u[i] == top ? p[i] : 0.0;
    } else {
      expected[i] = p[i] * std::exp(sol.tilt * (u[i] - top));
    }
    z += expected[i];
  }
  double tilt_err = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (p[i] <= 0.0) continue;
    expected[i] /= z;
    // Subnormal weights carry fewer than 53 significant bits; compare only normal values.
    const double scale = std::max(expected[i], sol.weights[i]);
    if (scale >= std::numeric_limits<double>::min()) tilt_err = std::max(tilt_err, std::abs(sol.weights[i] - expected[i]) / scale);
  }
  const bool active = !sol.boundary && inst.rho > 0.0 && sol.tilt > 0.0;
  return {tilt_err, active ? std::abs(sol.kl - inst.rho) : 0.0};
}

DualityReport check_duality(std::size_t instances, std::uint64_t seed, double tolerance, double identity_tolerance) {
  std::mt19937_64 rng(derive_seed(seed, "verify/duality"));
  DualityReport rep;
  for (std::size_t id = 0; id < instances; ++id) {
    const DroInstance inst = random_dro_instance(rng);
    const WorstCaseSolution sol = worst_case_oracle(inst.losses, inst.base, inst.rho);
    DualityRow row;
    row.id = id;
    row.primal = sol.value;
    row.dual = dual_risk(inst.losses, inst.base, inst.rho);
    row.gap = std::abs(row.dual - row.primal);
    row.relative = row.gap / std::max(1.0, std::abs(row.primal));
    std::tie(row.tilt_error, row.kl_error) = tilt_identity_error(inst, sol);
    row.pass = row.relative <= tolerance && row.tilt_error <= identity_tolerance && row.kl_error <= identity_tolerance;
    rep.max_relative = std::max(rep.max_relative, row.relative);
    rep.max_tilt_error = std::max(rep.max_tilt_error, row.tilt_error);
    rep.max_kl_error = std::max(rep.max_kl_error, row.kl_error);
    if (!row.pass) ++rep.failures;
    rep.rows.push_back(row);
  }
  return rep;
}

std::string duality_csv(const DualityReport& report, const std::string& hash, std::uint64_t seed) {
  std::string s = csv_preamble(hash, seed) + "instance,primal,dual,abs_gap,relative_gap,pass\n";
  for (const DualityRow& r : report.rows) {
    s += std::to_string(r.id) + "," + format_double(r.primal) + "," + format_double(r.dual) + "," +
         format_double(r.gap) + "," + format_double(r.relative) + "," + (r.pass ? "1" : "0") + "\n";
  }
  return s;
}

double broken_aggregate(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg) {
  if (!agg.robust()) return aggregate(losses, calib, agg);
  std::vector<double> scaled(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    scaled[i] = (agg.calibrated() ? calib[i] : 1.0) * losses[i] / agg.lambda;
  }
  const std::vector<double> p(losses.size(), 1.0 / static_cast<double>(losses.size()));
  return log_mean_exp(p, scaled);
}

LimitReport check_lse_limits(std::size_t batches, std::uint64_t seed, const AggregateFn& agg_fn) {
  const AggregateFn agg = agg_fn ? agg_fn : AggregateFn(static_cast<double (*)(std::span<const double>,
                                                                             std::span<const double>,
                                                                             const Aggregator&)>(&aggregate));
  std::mt19937_64 rng(derive_seed(seed, "verify/limits"));
  std::uniform_int_distribution<std::size_t> size(2, 16);
  std::uniform_real_distribution<double> base(-5.0, 5.0);
  std::uniform_real_distribution<double> calib(0.2, 3.8);
  std::uniform_real_distribution<double> gap(0.1, 1.0);
  LimitReport rep;
  rep.batches = batches;
  for (std::size_t b = 0; b < batches; ++b) {
    // Build h̃u with pairwise gaps ≥ 0.1, then split each product into (h̃, u).
    const std::size_t n = size(rng);
    std::vector<double> products{base(rng)};
    for (std::size_t i = 1; i < n; ++i) products.push_back(products.back() + gap(rng));
    std::shuffle(products.begin(), products.end(), rng);
    std::vector<double> h(n);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = calib(rng);
      u[i] = products[i] / h[i];
    }
    double mean = 0.0;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = h[i] * u[i];
      mean += v / static_cast<double>(n);
      top = std::max(top, v);
    }
    rep.max_large_lambda_error =
        std::max(rep.max_large_lambda_error, std::abs(agg(u, h, {AggregatorKind::kDora, 1e6}) - mean));
    rep.max_small_lambda_error =
        std::max(rep.max_small_lambda_error, std::abs(agg(u, h, {AggregatorKind::kDora, 1e-4}) - top));
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20; ++k) {
      const double lambda = std::pow(10.0, -4.0 + 10.0 * k / 19.0);
      const double v = agg(u, h, {AggregatorKind::kDora, lambda});
      if (v > prev + 1e-12 * std::max(1.0, std::abs(prev))) ++rep.monotonicity_violations;
      prev = v;
    }
  }
  rep.pass = rep.max_large_lambda_error <= 1e-4 && rep.max_small_lambda_error <= 1e-3 && rep.monotonicity_violations == 0;
  return rep;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

std::vector<GradientCheck> check_gradients(std::size_t draws, std::uint64_t seed, double tolerance) {
  constexpr std::size_t X = 3;
  constexpr std::size_t Y = 5;
  constexpr std::size_t n = 4;
  std::mt19937_64 rng(derive_seed(seed, "verify/gradients"));
  std::uniform_real_distribution<double> calib(0.1, 3.9);
  std::uniform_real_distribution<double> lambda(0.5, 2.0);
  std::uniform_int_distribution<int> pick_kind(0, 4);
  const LossKind kinds[] = {LossKind::kDpoPair, LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire, LossKind::kSft};
  LossParams params;

  std::vector<GradientCheck> out;
  for (LossKind kind : kinds) {
    GradientCheck c;
    c.label = "loss/" + std::string(to_string(kind));
    for (std::size_t t = 0; t < draws; ++t) {
      const PolicyModel ref = PolicyModel(random_logits(X, Y, rng)).frozen_copy();
      const Table theta = random_logits(X, Y, rng);
      const PreferenceDatum d = random_datum(X, Y, n, rng);
      auto f = [&](const Table& th) { return evaluate_loss(kind, params, PolicyModel(th), ref, d).value; };
      const Table analytic = evaluate_loss(kind, params, PolicyModel(theta), ref, d).dense_gradient(X);
      c.max_relative_error =
          std::max(c.max_relative_error, relative_error(analytic.values(), finite_difference(f, theta)));
      ++c.draws;
    }
    c.pass = c.max_relative_error <= tolerance;
    out.push_back(c);
  }
  for (AggregatorKind agg_kind : {AggregatorKind::kDora, AggregatorKind::kDro, AggregatorKind::kReweight,
                                  AggregatorKind::kErm}) {
    GradientCheck c;
    c.label = "aggregate/" + std::string(to_string(agg_kind));
    for (std::size_t t = 0; t < draws; ++t) {
      const PolicyModel ref = PolicyModel(random_logits(X, Y, rng)).frozen_copy();
      const Table theta = random_logits(X, Y, rng);
      const LossKind kind = kinds[pick_kind(rng)];
      const Aggregator agg{agg_kind, lambda(rng)};
      std::vector<PreferenceDatum> batch;
      std::vector<double> h;
      for (int i = 0; i < 6; ++i) {
        batch.push_back(random_datum(X, Y, n, rng));
        h.push_back(calib(rng));
      }
      auto losses_at = [&](const Table& th) {
        std::vector<LossValue> v;
        const PolicyModel p(th);
        for (const auto& d : batch) v.push_back(evaluate_loss(kind, params, p, ref, d));
        return v;
      };
      auto f = [&](const Table& th) {
        std::vector<double> u;
        for (const auto& l : losses_at(th)) u.push_back(l.value);
        return aggregate(u, h, agg);
      };
      const Table analytic = aggregate_grad(losses_at(theta), h, agg, X);
      c.max_relative_error =
          std::max(c.max_relative_error, relative_error(analytic.values(), finite_difference(f, theta)));
      ++c.draws;
    }
    c.pass = c.max_relative_error <= tolerance;
    out.push_back(c);
  }
  return out;
}

}  // namespace dora
