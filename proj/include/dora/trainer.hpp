#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dora/calib.hpp"
#include "dora/dro.hpp"
#include "dora/losses.hpp"
#include "dora/policy.hpp"
#include "dora/world.hpp"

namespace dora {

enum class OptimizerKind {
  kSgd,   // θ ← θ - η g
  kAdam,  // bias-corrected Adam; invariant to a global rescaling of the loss
};

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct TrainConfig {
  LossKind loss_kind = LossKind::kDpoPl;
  LossParams loss_params = LossParams::dialogue();
  Aggregator aggregator{AggregatorKind::kDora, 1.0};
  double step_size = 0.5;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double corruption_rate = 0.0;
  double early_stop_grad_norm = 1e-8;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate(std::size_t dataset_size) const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double batch_loss = 0.0;
  double grad_norm = 0.0;
  double wall_seconds = 0.0;  // kept in memory only; exported logs stay byte-reproducible
};

struct EpochSnapshot {
  std::size_t epoch = 0;
  double mean_batch_loss = 0.0;
  double metric = 0.0;  // value of the optional epoch observer, NaN when absent
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<EpochSnapshot> epochs;
  bool early_stopped = false;
};

// Thrown when a batch produces a non-finite loss.
class NumericAbort : public NumericError {
 public:
  NumericAbort(std::size_t step, std::vector<std::size_t> indices);
  std::size_t step() const { return step_; }
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::size_t step_;
  std::vector<std::size_t> indices_;
};

using EpochObserver = std::function<double(const PolicyModel&)>;

// Phase 1: one classifier per slot, in slot order.
std::vector<ClassifierModel> run_phase1(const Dataset& dataset, std::size_t query_count,
                                        std::size_t response_count, const ClassifierConfig& config);

struct Phase2Result {
  PolicyModel policy;
  TrainingLog log;
  std::vector<CalibrationRecord> calibration;
};

// Phase 2: precompute h̃ once, then minibatch gradient descent on the aggregated loss.
Phase2Result run_phase2(const Dataset& dataset, const std::vector<ClassifierModel>& classifiers,
                        const PolicyModel& ref_policy, const TrainConfig& config,
                        const EpochObserver& observer = {});

struct PolicyTrainResult {
  PolicyModel policy;
  TrainingLog log;
};

// The Phase 2 loop with caller-supplied calibration values (one per datum).
PolicyTrainResult train_policy(const Dataset& dataset, std::span<const double> calibration,
                               const PolicyModel& ref_policy, const TrainConfig& config,
                               const EpochObserver& observer = {});

// Per-datum losses and the aggregated gradient for one batch; shared by the loop and tests.
struct BatchEvaluation {
  std::vector<LossValue> losses;
  double objective = 0.0;
  Table gradient;
};
BatchEvaluation evaluate_batch(const Dataset& dataset, std::span<const std::size_t> batch,
                               std::span<const double> calibration, const PolicyModel& policy,
                               const PolicyModel& ref_policy, const TrainConfig& config);

struct SelfTrainConfig {
  std::size_t dataset_size = 512;
  ClassifierConfig classifier;
  TrainConfig train;
  RewardConfig reward;
  bool reuse_classifiers = false;
  std::uint64_t seed = 0;
  std::size_t eval_queries = 2000;
};

struct SelfTrainIteration {
  PolicyModel policy;
  double target_kl = 0.0;
  double win_vs_target = 0.0;
  double lose_vs_target = 0.0;
  double tie_vs_target = 0.0;
};

// Each iteration regenerates data whose non-target slots are sampled from the current policy,
// reruns Phase 1 (unless reusing the first classifiers) and Phase 2 with the current policy as
// reference and initialization.
std::vector<SelfTrainIteration> self_train(const World& world, const MixtureSpec& spec,
                                           const PolicyModel& policy, std::size_t iterations,
                                           const SelfTrainConfig& config);

struct ProbeConfig {
  std::size_t query_count = 4;
  std::size_t response_count = 4;
  std::size_t data_per_query = 4;
  double lambda = 1.0;
  std::vector<std::size_t> horizons{100, 1000, 10000};
  std::size_t reference_multiplier = 100;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kSft;
};

struct ProbeResult {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS residual of the log-log fit
  bool converged_at_init = false;
  std::vector<std::size_t> horizons;
  std::vector<double> gaps;
  double optimum = 0.0;
  double step_size = 0.0;
};

// Smooth convex objective over a flat parameter vector.
struct ConvexObjective {
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  std::vector<double> init;
  double step_size = 1.0;
};

// Constant-step gradient descent; fits log(F(θ_T) - F*) against log T. F* comes from a run
// `reference_steps` long.
ProbeResult convergence_probe(const ConvexObjective& objective, const std::vector<std::size_t>& horizons,
                              std::size_t reference_steps);

// Default probe: tabular SFT loss under DORA aggregation on point-mass preferences.
ProbeResult convergence_probe(const ProbeConfig& config);

}  // namespace dora
