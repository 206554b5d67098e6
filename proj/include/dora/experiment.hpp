#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dora/calib.hpp"
#include "dora/metrics.hpp"
#include "dora/policy.hpp"
#include "dora/trainer.hpp"
#include "dora/world.hpp"

namespace dora {

struct EvalConfig {
  std::size_t win_queries = 2000;
  std::size_t slope_samples = 2000;
};

struct SweepConfig {
  std::vector<double> lambdas{0.5, 1.0, 2.0, 4.0};
  std::vector<AggregatorKind> strategies{AggregatorKind::kErm, AggregatorKind::kDro, AggregatorKind::kReweight,
                                         AggregatorKind::kDora};
  std::vector<LossKind> losses{LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
};

struct VerifyConfig {
  std::size_t instances = 1000;
  std::size_t gradient_draws = 50;
};

// Phase 2 settings used by experiments: Adam, so DORA's comparison against ERM is not confounded
// by the global scale of h̃ acting as a learning-rate multiplier.
inline TrainConfig default_experiment_train() {
  TrainConfig t;
  t.optimizer = OptimizerKind::kAdam;
  t.step_size = 0.01;
  t.epochs = 20;
  return t;
}

// Everything one pipeline run needs. All sub-seeds are derived from `seed`.
struct ExperimentConfig {
  WorldConfig world;
  MixtureSpec mixture{0.5, {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
  std::size_t dataset_size = 512;
  ClassifierConfig classifier;
  SftConfig sft;
  TrainConfig train = default_experiment_train();
  RewardConfig reward;
  EvalConfig eval;
  SweepConfig sweep;
  VerifyConfig verify;
  std::uint64_t seed = 0;
  std::string output_dir = "dora-out";  // not part of the config hash

  void validate() const;
};

struct EvalReport {
  std::string label;
  double lambda = 0.0;
  double target_kl = 0.0;
  double win_rate = 0.0;
  double lose_rate = 0.0;
  double tie_rate = 0.0;
  double reward_confidence_slope = 0.0;
  double scatter_gap = 0.0;  // mean |log π(y_pref) - log π_erm(y_pref)|, NaN when not computed
  std::string config_hash;
  std::uint64_t seed = 0;

  bool operator==(const EvalReport&) const = default;
};

// World, data, classifiers, calibration and SFT reference for one seed; shared by every
// strategy so comparisons across cells are paired.
struct PreparedRun {
  std::uint64_t seed = 0;
  World world;
  Dataset dataset;
  std::vector<ClassifierModel> classifiers;
  std::vector<CalibrationRecord> calibration;
  PolicyModel sft_policy;  // frozen; initialization and reference for Phase 2
};

struct SeedPlan {
  std::uint64_t world = 0;
  std::uint64_t data = 0;
  std::uint64_t corruption = 0;
  std::uint64_t classifier = 0;
  std::uint64_t train = 0;
  std::uint64_t eval = 0;
};
SeedPlan plan_seeds(std::uint64_t seed);

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed);
// Same pipeline on an existing world and clean dataset (corruption is applied here).
PreparedRun prepare_from_data(const ExperimentConfig& config, std::uint64_t seed, World world, Dataset clean);

struct RunOutcome {
  PolicyModel policy;
  TrainingLog log;
  EvalReport report;
};

RunOutcome train_and_evaluate(const PreparedRun& run, const ExperimentConfig& config, const TrainConfig& train,
                              const std::string& label);

EvalReport evaluate_policy(const PolicyModel& policy, const PreparedRun& run, const ExperimentConfig& config,
                           const std::string& label);

// Mean vertical distance between two log-prob scatters over the dataset's preferred responses.
double scatter_gap(const PolicyModel& a, const PolicyModel& b, const PolicyModel& sft, const Dataset& dataset);

std::string config_hash(const ExperimentConfig& config);

// Full factorial over (λ, seed) with the DORA aggregator. Each row also carries the scatter
// gap against an ERM run on the same seed.
std::vector<EvalReport> lambda_sweep(const ExperimentConfig& base, const std::vector<double>& lambdas,
                                     const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

// One report per (strategy, loss kind, seed); strategies share each seed's prepared run.
std::vector<EvalReport> strategy_grid(const ExperimentConfig& base, const std::vector<AggregatorKind>& strategies,
                                      const std::vector<LossKind>& losses, const std::vector<std::uint64_t>& seeds,
                                      std::size_t jobs = 1);

std::string cell_label(AggregatorKind strategy, LossKind loss);

// Everything the sweep command produces for one seed. The seed is the unit of work and of
// resumption, so chunks can be computed in any order and merged by seed.
struct SweepChunk {
  std::uint64_t seed = 0;
  std::vector<EvalReport> grid;        // (λ, strategy) rows with the configured loss; λ-major
  std::vector<EvalReport> strategies;  // (strategy, loss) rows at the configured λ; strategy-major
  std::vector<std::pair<double, double>> erm_scatter;   // (log π_sft, log π_erm) on preferred responses
  std::vector<std::pair<double, double>> dora_scatter;  // (log π_sft, log π_dora) at the configured λ
};

// Strategies that ignore λ are trained once per seed and their report reused across λ.
SweepChunk run_sweep_seed(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace dora
