#include "dora/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "dora/metrics.hpp"

namespace dora {

namespace {

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

double frobenius(const Table& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

// First and second moment state for Adam, one entry per logit.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

Table adam_direction(const Table& grad, AdamState& st, const TrainConfig& cfg) {
  const std::vector<double>& g = grad.values();
  if (st.m.empty()) {
    st.m.assign(g.size(), 0.0);
    st.v.assign(g.size(), 0.0);
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
  std::vector<double> dir(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    st.m[i] = cfg.adam_beta1 * st.m[i] + (1.0 - cfg.adam_beta1) * g[i];
    st.v[i] = cfg.adam_beta2 * st.v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
    dir[i] = (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.adam_epsilon);
  }
  return Table(grad.rows(), grad.cols(), std::move(dir));
}

}  // namespace

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

NumericAbort::NumericAbort(std::size_t step, std::vector<std::size_t> indices)
    : NumericError("non-finite loss at step " + std::to_string(step) + " for data [" + join_indices(indices) + "]"),
      step_(step),
      indices_(std::move(indices)) {}

void TrainConfig::validate(std::size_t dataset_size) const {
  loss_params.validate();
  if (aggregator.robust() && !(aggregator.lambda > 0.0)) throw ConfigError("train.lambda must be positive");
  if (!(step_size > 0.0)) throw ConfigError("train.step_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (batch_size > dataset_size) throw ConfigError("train.batch_size exceeds the dataset size");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw ConfigError("train.corruption_rate must lie in [0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0)) {
    throw ConfigError("train.adam_beta1/adam_beta2 must lie in [0, 1) and train.adam_epsilon must be positive");
  }
}

std::vector<ClassifierModel> run_phase1(const Dataset& dataset, std::size_t X, std::size_t Y,
                                        const ClassifierConfig& config) {
  if (dataset.data.empty()) throw ConfigError("run_phase1: empty dataset");
  const std::size_t n = dataset.data.front().responses.size();
  std::vector<ClassifierModel> models;
  models.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    ClassifierConfig slot_cfg = config;
    slot_cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(j));
    models.push_back(train_classifier(dataset, j, X, Y, slot_cfg));
  }
  return models;
}

BatchEvaluation evaluate_batch(const Dataset& dataset, std::span<const std::size_t> batch,
                               std::span<const double> calibration, const PolicyModel& policy,
                               const PolicyModel& ref_policy, const TrainConfig& config) {
  BatchEvaluation ev;
  ev.losses.reserve(batch.size());
  std::vector<double> u;
  std::vector<double> h;
  std::vector<std::size_t> bad;
  for (std::size_t i : batch) {
    ev.losses.push_back(evaluate_loss(config.loss_kind, config.loss_params, policy, ref_policy, dataset.data[i]));
    u.push_back(ev.losses.back().value);
    h.push_back(calibration[i]);
    if (!std::isfinite(u.back())) bad.push_back(i);
  }
  if (!bad.empty()) throw NumericAbort(0, std::move(bad));
  ev.objective = aggregate(u, h, config.aggregator);
  ev.gradient = aggregate_grad(ev.losses, h, config.aggregator, policy.query_count());
  return ev;
}

PolicyTrainResult train_policy(const Dataset& dataset, std::span<const double> calibration,
                               const PolicyModel& ref_policy, const TrainConfig& config,
                               const EpochObserver& observer) {
  config.validate(dataset.size());
  if (calibration.size() != dataset.size()) throw ConfigError("one calibration value per datum is required");
  if (!ref_policy.frozen()) throw ConfigError("the reference policy must be frozen");

  PolicyTrainResult result;
  result.policy = ref_policy.trainable_copy();
  std::mt19937_64 rng(derive_seed(config.seed, "phase2/batches"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  AdamState adam;
  const auto start = std::chrono::steady_clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && !result.log.early_stopped; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      BatchEvaluation ev;
      try {
        ev = evaluate_batch(dataset, batch, calibration, result.policy, ref_policy, config);
      } catch (const NumericAbort& e) {
        throw NumericAbort(step, e.indices());
      }
      if (!std::isfinite(ev.objective)) throw NumericAbort(step, {batch.begin(), batch.end()});
      const double norm = frobenius(ev.gradient);
      if (config.optimizer == OptimizerKind::kAdam) {
        result.policy.apply_gradient(adam_direction(ev.gradient, adam, config), config.step_size);
      } else {
        result.policy.apply_gradient(ev.gradient, config.step_size);
      }
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.steps.push_back({step, epoch, ev.objective, norm, elapsed});
      epoch_loss += ev.objective;
      ++batches;
      ++step;
      if (norm < config.early_stop_grad_norm) {
        result.log.early_stopped = true;
        break;
      }
    }
    EpochSnapshot snap;
    snap.epoch = epoch;
    snap.mean_batch_loss = epoch_loss / static_cast<double>(batches);
    snap.metric = observer ? observer(result.policy) : std::numeric_limits<double>::quiet_NaN();
    result.log.epochs.push_back(snap);
  }
  return result;
}

Phase2Result run_phase2(const Dataset& dataset, const std::vector<ClassifierModel>& classifiers,
                        const PolicyModel& ref_policy, const TrainConfig& config, const EpochObserver& observer) {
  Phase2Result out;
  out.calibration = precompute_calibration(dataset, classifiers, dataset.spec);
  const std::vector<double> h = calibration_values(out.calibration);
  PolicyTrainResult r = train_policy(dataset, h, ref_policy, config, observer);
  out.policy = std::move(r.policy);
  out.log = std::move(r.log);
  return out;
}

std::vector<SelfTrainIteration> self_train(const World& world, const MixtureSpec& spec, const PolicyModel& policy,
                                           std::size_t iterations, const SelfTrainConfig& config) {
  if (iterations == 0) throw ConfigError("self_train: iterations must be >= 1");
  const RewardFn reward = make_reward_fn(world, config.reward);
  const PolicyModel target_policy = PolicyModel::from_probabilities(world.target()).frozen_copy();
  std::vector<SelfTrainIteration> out;
  PolicyModel current = policy.frozen_copy();
  std::vector<ClassifierModel> classifiers;
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(it));
    const PolicyModel generator = current;
    const ResponseSource from_policy = [&generator](std::size_t x, std::size_t, std::mt19937_64& rng) {
      return sample_response(generator, x, rng);
    };
    const Dataset data = generate_dataset(world, spec, config.dataset_size, seed, reward, from_policy);
    if (classifiers.empty() || !config.reuse_classifiers) {
      ClassifierConfig cc = config.classifier;
      cc.seed = derive_seed(seed, "classifier");
      classifiers = run_phase1(data, world.query_count, world.response_count, cc);
    }
    TrainConfig tc = config.train;
    tc.seed = derive_seed(seed, "train");
    Phase2Result r = run_phase2(data, classifiers, current, tc);
    SelfTrainIteration rec;
    rec.policy = r.policy.frozen_copy();
    rec.target_kl = policy_target_kl(rec.policy, world);
    const WinRate wr = win_rate(rec.policy, target_policy, world, config.eval_queries, derive_seed(seed, "eval"),
                                config.reward);
    rec.win_vs_target = wr.win;
    rec.lose_vs_target = wr.lose;
    rec.tie_vs_target = wr.tie;
    current = rec.policy;
    out.push_back(std::move(rec));
  }
  return out;
}

ProbeResult convergence_probe(const ConvexObjective& objective, const std::vector<std::size_t>& horizons,
                              std::size_t reference_steps) {
  if (horizons.size() < 2) throw ConfigError("convergence_probe needs at least two horizons");
  std::vector<std::size_t> sorted = horizons;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t total = std::max(reference_steps, sorted.back());

  ProbeResult res;
  res.horizons = sorted;
  res.step_size = objective.step_size;
  std::vector<double> theta = objective.init;
  const double initial = objective.value(theta);
  std::vector<double> at_horizon;
  std::size_t next = 0;
  for (std::size_t t = 1; t <= total; ++t) {
    const std::vector<double> g = objective.gradient(theta);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= objective.step_size * g[i];
    if (next < sorted.size() && t == sorted[next]) {
      at_horizon.push_back(objective.value(theta));
      ++next;
    }
  }
  res.optimum = std::min(objective.value(theta), *std::min_element(at_horizon.begin(), at_horizon.end()));
  if (std::abs(initial - res.optimum) <= 1e-12 * std::max(1.0, std::abs(res.optimum))) {
    res.converged_at_init = true;
    res.gaps.assign(sorted.size(), 0.0);
    return res;
  }

  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double gap = at_horizon[k] - res.optimum;
    res.gaps.push_back(gap);
    if (gap <= 0.0) throw NumericError("convergence_probe: gap at T = " + std::to_string(sorted[k]) +
                                       " is not positive; lengthen the reference run");
    lx.push_back(std::log(static_cast<double>(sorted[k])));
    ly.push_back(std::log(gap));
  }
  const LinearFit fit = ols_fit(lx, ly);
  res.slope = fit.slope;
  res.intercept = fit.intercept;
  double ss = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - (fit.intercept + fit.slope * lx[k]);
    ss += r * r;
  }
  res.residual = std::sqrt(ss / static_cast<double>(lx.size()));
  return res;
}

ProbeResult convergence_probe(const ProbeConfig& config) {
  if (config.loss_kind != LossKind::kSft) {
    throw ConfigError("convergence_probe only accepts convex loss kinds (sft), got '" +
                      std::string(to_string(config.loss_kind)) + "'");
  }
  if (!(config.lambda > 0.0)) throw ConfigError("probe lambda must be positive");
  const std::size_t X = config.query_count;
  const std::size_t Y = config.response_count;
  std::mt19937_64 rng(derive_seed(config.seed, "probe"));
  std::uniform_real_distribution<double> calib_dist(0.5, 1.5);
  std::uniform_int_distribution<std::size_t> pick(0, Y - 1);

  // Each query prefers a single response, so the infimum is approached but never attained:
  // the regime in which constant-step gradient descent shows its sublinear rate.
  Dataset data;
  std::vector<double> h;
  for (std::size_t x = 0; x < X; ++x) {
    const std::size_t preferred = pick(rng);
    for (std::size_t k = 0; k < config.data_per_query; ++k) {
      PreferenceDatum d;
      d.query = x;
      d.responses = {preferred};
      d.source_labels = {1};
      d.rewards = {0.0};
      d.ranking = {0};
      data.data.push_back(d);
      h.push_back(calib_dist(rng));
    }
  }
  const Aggregator agg{AggregatorKind::kDora, config.lambda};
  const PolicyModel ref(X, Y);
  auto as_policy = [&](const std::vector<double>& theta) { return PolicyModel(Table(X, Y, theta)); };
  auto losses_at = [&](const std::vector<double>& theta) {
    const PolicyModel p = as_policy(theta);
    std::vector<LossValue> out;
    for (const auto& d : data.data) out.push_back(sft_loss(p, d));
    return out;
  };
  ConvexObjective obj;
  obj.value = [&](const std::vector<double>& theta) {
    std::vector<double> u;
    for (const auto& l : losses_at(theta)) u.push_back(l.value);
    return aggregate(u, h, agg);
  };
  obj.gradient = [&](const std::vector<double>& theta) {
    return aggregate_grad(losses_at(theta), h, agg, X).values();
  };
  obj.init.assign(X * Y, 0.0);
  // Smoothness bound: softmax Hessian ≤ 1/2, squared gradient norm ≤ 2, both scaled by max h̃.
  const double h_max = *std::max_element(h.begin(), h.end());
  obj.step_size = 1.0 / (0.5 * h_max + 2.0 * h_max * h_max / config.lambda);
  const std::size_t longest = *std::max_element(config.horizons.begin(), config.horizons.end());
  return convergence_probe(obj, config.horizons, longest * config.reference_multiplier);
}

}  // namespace dora
