#include "dora/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "dora/io.hpp"

namespace dora {

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. Results are written by index,
// so the output order never depends on scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void ExperimentConfig::validate() const {
  mixture.validate(world.n_slots);
  if (dataset_size == 0) throw ConfigError("data.size must be positive");
  train.validate(dataset_size);
  if (!(classifier.learning_rate > 0.0)) throw ConfigError("classifier.learning_rate must be positive");
  if (classifier.epochs == 0) throw ConfigError("classifier.epochs must be positive");
  if (!(classifier.epsilon_clamp > 0.0 && classifier.epsilon_clamp < 0.5)) {
    throw ConfigError("classifier.epsilon_clamp must lie in (0, 0.5)");
  }
  if (!(sft.learning_rate > 0.0)) throw ConfigError("sft.learning_rate must be positive");
  if (eval.win_queries == 0) throw ConfigError("eval.win_queries must be positive");
  if (eval.slope_samples < 2) throw ConfigError("eval.slope_samples must be >= 2");
  for (double l : sweep.lambdas) {
    if (!(l > 0.0)) throw ConfigError("sweep.lambdas must be positive");
  }
  if (sweep.seeds.empty()) throw ConfigError("sweep.seeds must be nonempty");
}

SeedPlan plan_seeds(std::uint64_t seed) {
  SeedPlan p;
  p.world = derive_seed(seed, "world");
  p.data = derive_seed(seed, "data");
  p.corruption = derive_seed(seed, "corruption");
  p.classifier = derive_seed(seed, "classifier");
  p.train = derive_seed(seed, "train");
  p.eval = derive_seed(seed, "eval");
  return p;
}

std::string config_hash(const ExperimentConfig& config) {
  Json j = to_json(config);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const SeedPlan seeds = plan_seeds(seed);
  WorldConfig wc = config.world;
  wc.seed = seeds.world;
  World world = build_world(wc);
  Dataset data = generate_dataset(world, config.mixture, config.dataset_size, seeds.data,
                                  make_reward_fn(world, config.reward));
  return prepare_from_data(config, seed, std::move(world), std::move(data));
}

PreparedRun prepare_from_data(const ExperimentConfig& config, std::uint64_t seed, World world, Dataset clean) {
  config.validate();
  const SeedPlan seeds = plan_seeds(seed);
  PreparedRun run;
  run.seed = seed;
  run.world = std::move(world);
  run.dataset = std::move(clean);
  if (config.train.corruption_rate > 0.0) {
    std::mt19937_64 rng(seeds.corruption);
    run.dataset = corrupt_labels(run.dataset, config.train.corruption_rate, rng);
  }
  ClassifierConfig cc = config.classifier;
  cc.seed = seeds.classifier;
  run.classifiers = run_phase1(run.dataset, run.world.query_count, run.world.response_count, cc);
  run.calibration = precompute_calibration(run.dataset, run.classifiers, config.mixture);
  run.sft_policy = sft_train(run.dataset, run.world.query_count, run.world.response_count, config.sft).policy;
  run.sft_policy.seed = seed;
  run.sft_policy.config_hash = config_hash(config);
  return run;
}

EvalReport evaluate_policy(const PolicyModel& policy, const PreparedRun& run, const ExperimentConfig& config,
                           const std::string& label) {
  const SeedPlan seeds = plan_seeds(run.seed);
  const PolicyModel target = PolicyModel::from_probabilities(run.world.target()).frozen_copy();
  EvalReport r;
  r.label = label;
  r.target_kl = policy_target_kl(policy, run.world);
  const WinRate wr = win_rate(policy, target, run.world, config.eval.win_queries, seeds.eval, config.reward);
  r.win_rate = wr.win;
  r.lose_rate = wr.lose;
  r.tie_rate = wr.tie;
  try {
    r.reward_confidence_slope = reward_confidence_regression(policy, run.world, run.classifiers,
                                                             config.eval.slope_samples,
                                                             derive_seed(seeds.eval, "slope"), std::nullopt,
                                                             config.reward)
                                    .fit.slope;
  } catch (const NumericError&) {
    r.reward_confidence_slope = std::numeric_limits<double>::quiet_NaN();
  }
  r.scatter_gap = std::numeric_limits<double>::quiet_NaN();
  r.config_hash = config_hash(config);
  r.seed = run.seed;
  return r;
}

RunOutcome train_and_evaluate(const PreparedRun& run, const ExperimentConfig& config, const TrainConfig& train,
                              const std::string& label) {
  TrainConfig tc = train;
  tc.seed = plan_seeds(run.seed).train;
  const std::vector<double> h = calibration_values(run.calibration);
  PolicyTrainResult trained = train_policy(run.dataset, h, run.sft_policy, tc);
  RunOutcome out;
  out.policy = std::move(trained.policy);
  out.policy.seed = run.seed;
  out.policy.config_hash = config_hash(config);
  out.log = std::move(trained.log);
  out.report = evaluate_policy(out.policy, run, config, label);
  out.report.lambda = train.aggregator.lambda;
  return out;
}

double scatter_gap(const PolicyModel& a, const PolicyModel& b, const PolicyModel& sft, const Dataset& dataset) {
  const auto pa = logprob_scatter(a, sft, dataset);
  const auto pb = logprob_scatter(b, sft, dataset);
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) total += std::abs(pa[i].second - pb[i].second);
  return total / static_cast<double>(pa.size());
}

std::string cell_label(AggregatorKind strategy, LossKind loss) {
  return std::string(to_string(strategy)) + "/" + std::string(to_string(loss));
}

std::vector<EvalReport> lambda_sweep(const ExperimentConfig& base, const std::vector<double>& lambdas,
                                     const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  if (lambdas.empty() || seeds.empty()) throw ConfigError("lambda_sweep needs nonempty lambda and seed lists");
  std::vector<EvalReport> out(lambdas.size() * seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    const PreparedRun run = prepare_run(base, seeds[s]);
    TrainConfig erm = base.train;
    erm.aggregator = {AggregatorKind::kErm, 1.0};
    const RunOutcome baseline = train_and_evaluate(run, base, erm, "erm");
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      TrainConfig tc = base.train;
      tc.aggregator = {AggregatorKind::kDora, lambdas[l]};
      RunOutcome o = train_and_evaluate(run, base, tc, cell_label(AggregatorKind::kDora, tc.loss_kind));
      o.report.scatter_gap = scatter_gap(o.policy, baseline.policy, run.sft_policy, run.dataset);
      out[l * seeds.size() + s] = o.report;
    }
  });
  return out;
}

std::vector<EvalReport> strategy_grid(const ExperimentConfig& base, const std::vector<AggregatorKind>& strategies,
                                      const std::vector<LossKind>& losses, const std::vector<std::uint64_t>& seeds,
                                      std::size_t jobs) {
  if (strategies.empty() || losses.empty() || seeds.empty()) {
    throw ConfigError("strategy_grid needs nonempty strategy, loss and seed lists");
  }
  const std::size_t cells = strategies.size() * losses.size();
  std::vector<EvalReport> out(cells * seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    const PreparedRun run = prepare_run(base, seeds[s]);
    for (std::size_t a = 0; a < strategies.size(); ++a) {
      for (std::size_t k = 0; k < losses.size(); ++k) {
        TrainConfig tc = base.train;
        tc.aggregator.kind = strategies[a];
        tc.loss_kind = losses[k];
        const RunOutcome o = train_and_evaluate(run, base, tc, cell_label(strategies[a], losses[k]));
        out[(a * losses.size() + k) * seeds.size() + s] = o.report;
      }
    }
  });
  return out;
}

SweepChunk run_sweep_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const SweepConfig& sw = config.sweep;
  if (sw.lambdas.empty() || sw.strategies.empty() || sw.losses.empty()) {
    throw ConfigError("sweep needs nonempty lambdas, strategies and losses");
  }
  const PreparedRun run = prepare_run(config, seed);
  SweepChunk chunk;
  chunk.seed = seed;

  TrainConfig erm_config = config.train;
  erm_config.aggregator = {AggregatorKind::kErm, config.train.aggregator.lambda};
  const RunOutcome erm = train_and_evaluate(run, config, erm_config, cell_label(AggregatorKind::kErm, erm_config.loss_kind));
  chunk.erm_scatter = logprob_scatter(erm.policy, run.sft_policy, run.dataset);

  const auto uses_lambda = [](AggregatorKind k) { return k == AggregatorKind::kDro || k == AggregatorKind::kDora; };
  std::vector<std::optional<RunOutcome>> fixed(sw.strategies.size());
  for (double lambda : sw.lambdas) {
    for (std::size_t a = 0; a < sw.strategies.size(); ++a) {
      const AggregatorKind kind = sw.strategies[a];
      TrainConfig tc = config.train;
      tc.aggregator = {kind, lambda};
      RunOutcome o;
      if (kind == AggregatorKind::kErm) {
        o = erm;
      } else if (!uses_lambda(kind)) {
        if (!fixed[a]) fixed[a] = train_and_evaluate(run, config, tc, cell_label(kind, tc.loss_kind));
        o = *fixed[a];
      } else {
        o = train_and_evaluate(run, config, tc, cell_label(kind, tc.loss_kind));
      }
      o.report.lambda = lambda;
      o.report.scatter_gap = scatter_gap(o.policy, erm.policy, run.sft_policy, run.dataset);
      chunk.grid.push_back(o.report);
    }
  }

  for (AggregatorKind kind : sw.strategies) {
    for (LossKind loss : sw.losses) {
      TrainConfig tc = config.train;
      tc.aggregator.kind = kind;
      tc.loss_kind = loss;
      const RunOutcome o = train_and_evaluate(run, config, tc, cell_label(kind, loss));
      chunk.strategies.push_back(o.report);
      if (kind == AggregatorKind::kDora && loss == config.train.loss_kind) {
        chunk.dora_scatter = logprob_scatter(o.policy, run.sft_policy, run.dataset);
      }
    }
  }
  if (chunk.dora_scatter.empty()) {
    TrainConfig tc = config.train;
    tc.aggregator.kind = AggregatorKind::kDora;
    chunk.dora_scatter =
        logprob_scatter(train_and_evaluate(run, config, tc, "dora").policy, run.sft_policy, run.dataset);
  }
  return chunk;
}

}  // namespace dora
