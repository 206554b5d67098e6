#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dora/calib.hpp"
#include "dora/losses.hpp"
#include "dora/policy.hpp"
#include "dora/world.hpp"

namespace dora {

// (1/|X|) Σ_x KL(Q_0(·|x) || π(·|x)), with 0 log 0 = 0. +inf if π misses target support.
double policy_target_kl(const PolicyModel& policy, const World& world);

struct WinRate {
  double win = 0.0;
  double lose = 0.0;
  double tie = 0.0;
};

// Head-to-head on n_queries uniformly drawn queries; the reward oracle is the judge.
// Both policies draw from identically seeded streams, so a policy against itself always ties.
WinRate win_rate(const PolicyModel& a, const PolicyModel& b, const World& world, std::size_t n_queries,
                 std::uint64_t seed, const RewardConfig& reward = {});

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of ys on xs. Throws NumericError when xs has zero variance.
LinearFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct RewardConfidenceSample {
  std::vector<double> confidence;         // classifier confidence per sampled response
  std::vector<double> normalized_reward;  // min-max normalized over the sample
  LinearFit fit;
};

// Samples responses from the policy and regresses normalized reward on classifier confidence.
// Confidence is the mean over slot classifiers unless `slot` selects one.
RewardConfidenceSample reward_confidence_regression(const PolicyModel& policy, const World& world,
                                                    const std::vector<ClassifierModel>& classifiers,
                                                    std::size_t n_samples, std::uint64_t seed,
                                                    std::optional<std::size_t> slot = std::nullopt,
                                                    const RewardConfig& reward = {});

double reward_confidence_slope(const PolicyModel& policy, const World& world,
                               const std::vector<ClassifierModel>& classifiers, std::size_t n_samples,
                               std::uint64_t seed, std::optional<std::size_t> slot = std::nullopt);

// Per datum: (log π_sft(y_pref|x), log π(y_pref|x)).
std::vector<std::pair<double, double>> logprob_scatter(const PolicyModel& policy, const PolicyModel& sft_policy,
                                                       const Dataset& dataset);

}  // namespace dora
