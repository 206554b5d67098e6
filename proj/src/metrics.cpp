#include "dora/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dora {

double policy_target_kl(const PolicyModel& policy, const World& world) {
  if (policy.query_count() != world.query_count || policy.response_count() != world.response_count) {
    throw ConfigError("policy_target_kl: policy and world dimensions differ");
  }
  double total = 0.0;
  for (std::size_t x = 0; x < world.query_count; ++x) {
    const std::vector<double> lp = policy.log_probs(x);
    double kl = 0.0;
    for (std::size_t y = 0; y < world.response_count; ++y) {
      const double q = world.target()(x, y);
      if (q <= 0.0) continue;
      if (!std::isfinite(lp[y])) return std::numeric_limits<double>::infinity();
      kl += q * (std::log(q) - lp[y]);
    }
    total += std::max(0.0, kl);
  }
  return total / static_cast<double>(world.query_count);
}

WinRate win_rate(const PolicyModel& a, const PolicyModel& b, const World& world, std::size_t n_queries,
                 std::uint64_t seed, const RewardConfig& reward) {
  if (n_queries == 0) throw ConfigError("win_rate: n_queries must be >= 1");
  std::mt19937_64 query_rng(derive_seed(seed, "win_rate/query"));
  std::mt19937_64 rng_a(derive_seed(seed, "win_rate/response"));
  std::mt19937_64 rng_b = rng_a;
  std::uniform_int_distribution<std::size_t> pick(0, world.query_count - 1);
  std::size_t wins = 0;
  std::size_t losses = 0;
  for (std::size_t i = 0; i < n_queries; ++i) {
    const std::size_t x = pick(query_rng);
    const double ra = reward_oracle(world, x, sample_response(a, x, rng_a), reward);
    const double rb = reward_oracle(world, x, sample_response(b, x, rng_b), reward);
    if (ra > rb) {
      ++wins;
    } else if (rb > ra) {
      ++losses;
    }
  }
  const double n = static_cast<double>(n_queries);
  WinRate r;
  r.win = static_cast<double>(wins) / n;
  r.lose = static_cast<double>(losses) / n;
  r.tie = static_cast<double>(n_queries - wins - losses) / n;
  return r;
}

LinearFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("ols_fit needs >= 2 paired samples");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw NumericError("ols_fit: regressor has zero variance, slope undefined");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RewardConfidenceSample reward_confidence_regression(const PolicyModel& policy, const World& world,
                                                    const std::vector<ClassifierModel>& classifiers,
                                                    std::size_t n_samples, std::uint64_t seed,
                                                    std::optional<std::size_t> slot, const RewardConfig& reward) {
  if (n_samples < 2) throw ConfigError("reward_confidence_slope needs n_samples >= 2");
  if (classifiers.empty()) throw ConfigError("reward_confidence_slope needs classifiers");
  if (slot && *slot >= classifiers.size()) throw ConfigError("reward_confidence_slope: slot out of range");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, world.query_count - 1);
  RewardConfidenceSample s;
  std::vector<double> raw;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t x = pick(rng);
    const std::size_t y = sample_response(policy, x, rng);
    raw.push_back(reward_oracle(world, x, y, reward));
    double c = 0.0;
    if (slot) {
      c = predict_proba(classifiers[*slot], x, y);
    } else {
      for (const auto& m : classifiers) c += predict_proba(m, x, y);
      c /= static_cast<double>(classifiers.size());
    }
    s.confidence.push_back(c);
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  for (double r : raw) s.normalized_reward.push_back(range > 0.0 ? (r - *lo) / range : 0.0);
  s.fit = ols_fit(s.confidence, s.normalized_reward);
  return s;
}

double reward_confidence_slope(const PolicyModel& policy, const World& world,
                               const std::vector<ClassifierModel>& classifiers, std::size_t n_samples,
                               std::uint64_t seed, std::optional<std::size_t> slot) {
  return reward_confidence_regression(policy, world, classifiers, n_samples, seed, slot).fit.slope;
}

std::vector<std::pair<double, double>> logprob_scatter(const PolicyModel& policy, const PolicyModel& sft_policy,
                                                       const Dataset& dataset) {
  std::vector<std::pair<double, double>> out;
  out.reserve(dataset.size());
  for (const PreferenceDatum& d : dataset.data) {
    const std::size_t y = d.preferred_response();
    out.emplace_back(sft_policy.log_prob(d.query, y), policy.log_prob(d.query, y));
  }
  return out;
}

}  // namespace dora
