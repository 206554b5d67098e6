// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "dora/experiment.hpp"
#include "dora/io.hpp"
#include "dora/verify.hpp"

using namespace dora;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Outcome duality() {
  const auto t0 = Clock::now();
  const DualityReport r = check_duality(1000, 1);
  const double secs = seconds_since(t0);
  const bool ok = r.rows.size() == 1000 && r.failures == 0 && r.max_relative <= 1e-6 && secs < 10.0;
  return {ok, "1000 instances, max relative gap " + fmt(r.max_relative) + ", " + fmt(secs) + " s"};
}

Outcome tilt_identity() {
  const DualityReport r = check_duality(1000, 2);
  const bool ok = r.max_tilt_error <= 1e-8 && r.max_kl_error <= 1e-8;
  return {ok, "max tilt deviation " + fmt(r.max_tilt_error) + ", max |KL - rho| " + fmt(r.max_kl_error)};
}

Outcome lse_limits() {
  const LimitReport r = check_lse_limits(1000, 3);
  const bool ok = r.max_large_lambda_error <= 1e-4 && r.max_small_lambda_error <= 1e-3 &&
                  r.monotonicity_violations == 0;
  return {ok, "large-lambda error " + fmt(r.max_large_lambda_error) + ", small-lambda error " +
                  fmt(r.max_small_lambda_error) + ", " + std::to_string(r.monotonicity_violations) +
                  " monotonicity violations"};
}

Outcome gradients() {
  const std::vector<GradientCheck> checks = check_gradients(50, 4);
  std::set<std::string> labels;
  bool ok = true;
  double worst = 0.0;
  for (const GradientCheck& g : checks) {
    labels.insert(g.label);
    ok = ok && g.pass && g.draws == 50;
    worst = std::max(worst, g.max_relative_error);
  }
  for (LossKind k : {LossKind::kDpoPair, LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire, LossKind::kSft}) {
    ok = ok && labels.count("loss/" + std::string(to_string(k))) == 1;
  }
  for (AggregatorKind k : {AggregatorKind::kErm, AggregatorKind::kDro, AggregatorKind::kReweight, AggregatorKind::kDora}) {
    ok = ok && labels.count("aggregate/" + std::string(to_string(k))) == 1;
  }
  return {ok, std::to_string(checks.size()) + " checks x 50 draws, max relative error " + fmt(worst)};
}

struct RecoveryError {
  double posterior = 0.0;
  double weight = 0.0;
};

RecoveryError recovery_error(const World& w, const MixtureSpec& spec, std::size_t samples) {
  const Dataset d = generate_dataset(w, spec, samples, 6);
  RecoveryError e;
  for (std::size_t j = 0; j < w.n_slots; ++j) {
    const ClassifierModel m = train_classifier(d, j, w.query_count, w.response_count);
    const Table& q = w.components[MixtureSpec::designated_component(j)];
    for (std::size_t x = 0; x < w.query_count; ++x) {
      for (std::size_t y = 0; y < w.response_count; ++y) {
        if (mixture_density(w, spec, x, y) <= 0.0) continue;
        e.posterior = std::max(e.posterior, std::abs(predict_proba(m, x, y) - bayes_posterior(w, spec, j, x, y)));
        if (w.target()(x, y) > 1e-3 && q(x, y) > 1e-3) {
          const double ratio = w.target()(x, y) / q(x, y);
          e.weight = std::max(e.weight, std::abs(importance_weight(m, x, y) / ratio - 1.0));
        }
      }
    }
  }
  return e;
}

Outcome bayes_recovery() {
  // Tilted components at temperature 1 have additive log-odds, so the classifier family
  // contains the Bayes posterior and any remaining gap is sampling error.
  WorldConfig wc;
  wc.synthetic_temperature = 1.0;
  wc.seed = 5;
  const World w = build_world(wc);
  const MixtureSpec spec{0.5, {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
  const RecoveryError e = recovery_error(w, spec, 50000);
  const RecoveryError large = recovery_error(w, spec, 800000);
  const bool ok = e.posterior <= 0.02 && e.weight <= 0.05;
  return {ok, "50k samples: max posterior deviation " + fmt(e.posterior) + ", max importance-weight relative error " +
                  fmt(e.weight) + " (800k samples, for reference: " + fmt(large.posterior) + ", " + fmt(large.weight) + ")"};
}

ClassifierModel constant_classifier(std::size_t slot, double confidence, double gamma) {
  ClassifierModel m;
  m.slot = slot;
  m.query_count = 1;
  m.response_count = 2;
  m.weights.assign(feature_dimension(FeatureEncoding::kAdditive, 1, 2), 0.0);
  m.weights.back() = std::log(confidence / (1.0 - confidence));
  m.imbalance_ratio = gamma;
  m.epsilon_clamp = 1e-9;
  return m;
}

Outcome calibration_bound() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> bias(-30.0, 30.0);
  std::uniform_real_distribution<double> log_gamma(-4.0, 4.0);
  std::uniform_int_distribution<int> slots(2, 6);
  std::size_t outside = 0;
  const std::size_t trials = 1000000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = static_cast<std::size_t>(slots(rng));
    MixtureSpec spec;
    // α ≥ 1/n keeps every β_j ≤ 1/n.
    spec.alpha = std::uniform_real_distribution<double>(1.0 / static_cast<double>(n), 0.95)(rng);
    spec.betas.assign(n - 1, (1.0 - spec.alpha) / static_cast<double>(n - 1));
    std::vector<ClassifierModel> models;
    PreferenceDatum datum;
    for (std::size_t j = 0; j < n; ++j) {
      ClassifierModel m = constant_classifier(j, 0.5, std::exp(log_gamma(rng)));
      m.weights.back() = bias(rng);
      m.epsilon_clamp = 1e-12;
      models.push_back(std::move(m));
      datum.responses.push_back(0);
      datum.source_labels.push_back(0);
      datum.ranking.push_back(j);
    }
    const double h = calibration_factor(models, spec, datum).h_tilde;
    outside += !(h > 0.0 && h < static_cast<double>(n));
  }

  // Strict monotonicity of the unclamped factor in each slot's confidence.
  std::size_t violations = 0;
  std::size_t steps = 0;
  const MixtureSpec spec{0.4, {0.2, 0.2, 0.2}};
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> base{0.3, 0.6, 0.45, 0.8};
    double previous = -1.0;
    for (int g = 1; g < 100; ++g) {
      base[j] = 0.01 * g;
      std::vector<ClassifierModel> models;
      PreferenceDatum datum;
      for (std::size_t k = 0; k < 4; ++k) {
        models.push_back(constant_classifier(k, base[k], 1.0 + 0.25 * static_cast<double>(k)));
        datum.responses.push_back(0);
        datum.source_labels.push_back(0);
        datum.ranking.push_back(k);
      }
      const CalibrationRecord r = calibration_factor(models, spec, datum);
      if (g > 1) {
        ++steps;
        violations += !(r.h_tilde > previous);
      }
      previous = r.h_tilde;
    }
  }
  const bool ok = outside == 0 && violations == 0;
  return {ok, std::to_string(trials) + " random inputs, " + std::to_string(outside) + " outside (0, n); " +
                  std::to_string(violations) + "/" + std::to_string(steps) + " monotonicity violations"};
}

Outcome reduction_identity() {
  std::size_t pairs = 0;
  std::size_t identical = 0;
  for (std::uint64_t seed : {0, 1, 2}) {
    ExperimentConfig config;
    config.dataset_size = 128;
    const PreparedRun run = prepare_run(config, seed);
    const std::vector<double> ones(run.dataset.size(), 1.0);
    for (OptimizerKind opt : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
      for (LossKind loss : {LossKind::kDpoPair, LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire}) {
        TrainConfig tc = config.train;
        tc.optimizer = opt;
        tc.step_size = opt == OptimizerKind::kAdam ? 0.01 : 0.5;
        tc.loss_kind = loss;
        tc.epochs = 5;
        tc.seed = derive_seed(seed, "train");
        const auto bytes = [&](AggregatorKind kind) {
          tc.aggregator = {kind, 0.7};
          const PolicyTrainResult r = train_policy(run.dataset, ones, run.sft_policy, tc);
          return to_json(r.policy).dump() + training_log_csv(r.log, "", seed);
        };
        pairs += 2;
        identical += bytes(AggregatorKind::kDora) == bytes(AggregatorKind::kDro);
        identical += bytes(AggregatorKind::kReweight) == bytes(AggregatorKind::kErm);
      }
    }
  }
  return {identical == pairs, std::to_string(identical) + "/" + std::to_string(pairs) + " run pairs bit-identical"};
}

Outcome mixture_shift() {
  const ExperimentConfig config;
  const std::vector<LossKind> losses{LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire};
  std::vector<std::size_t> wins(losses.size(), 0);
  double slowest = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const auto t0 = Clock::now();
    const PreparedRun run = prepare_run(config, seed);
    const double prep = seconds_since(t0);
    for (std::size_t k = 0; k < losses.size(); ++k) {
      double kl[2];
      for (int a = 0; a < 2; ++a) {
        const auto t1 = Clock::now();
        TrainConfig tc = config.train;
        tc.loss_kind = losses[k];
        tc.aggregator.kind = a == 0 ? AggregatorKind::kErm : AggregatorKind::kDora;
        kl[a] = train_and_evaluate(run, config, tc, "").report.target_kl;
        slowest = std::max(slowest, prep + seconds_since(t1));
      }
      wins[k] += kl[1] < kl[0];
    }
  }
  bool ok = slowest < 60.0;
  std::string detail = "DORA below ERM target KL:";
  for (std::size_t k = 0; k < losses.size(); ++k) {
    ok = ok && wins[k] >= 8;
    detail += " " + std::string(to_string(losses[k])) + " " + std::to_string(wins[k]) + "/10";
  }
  return {ok, detail + "; slowest run " + fmt(slowest) + " s"};
}

Outcome corruption() {
  // The configured training loss; other listwise losses are reported for reference only.
  const ExperimentConfig base;
  bool ok = true;
  std::string detail;
  std::vector<LossKind> losses{base.train.loss_kind};
  for (LossKind k : {LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire}) {
    if (k != base.train.loss_kind) losses.push_back(k);
  }
  for (LossKind loss : losses) {
    const bool primary = loss == base.train.loss_kind;
    detail += (detail.empty() ? "" : "; ") + std::string(to_string(loss)) + (primary ? "" : " (reference)");
    for (double rate : {0.2, 0.4, 0.6}) {
      ExperimentConfig config = base;
      config.train.corruption_rate = rate;
      const std::vector<EvalReport> r =
          strategy_grid(config, {AggregatorKind::kErm, AggregatorKind::kDora}, {loss}, kSeeds);
      std::size_t wins = 0;
      for (std::size_t s = 0; s < kSeeds.size(); ++s) wins += r[kSeeds.size() + s].win_rate >= r[s].win_rate;
      if (primary) ok = ok && wins >= 7;
      detail += " " + fmt(rate) + ":" + std::to_string(wins) + "/10";
    }
  }
  return {ok, "DORA win rate >= ERM by corruption rate, " + detail};
}

Outcome lambda_ablation() {
  const std::vector<double> lambdas{0.5, 1.0, 2.0, 4.0};
  const std::vector<EvalReport> r = lambda_sweep(ExperimentConfig{}, lambdas, kSeeds);
  const std::size_t n = kSeeds.size();
  std::size_t monotone = 0;
  std::vector<double> mean(lambdas.size(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    bool ok = true;
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      mean[l] += r[l * n + s].scatter_gap / static_cast<double>(n);
      if (l > 0) ok = ok && r[l * n + s].scatter_gap <= r[(l - 1) * n + s].scatter_gap;
    }
    monotone += ok;
  }
  std::string curve;
  for (double m : mean) curve += " " + fmt(m);
  return {monotone >= 7, std::to_string(monotone) + "/10 seeds nonincreasing; mean gap by lambda" + curve};
}

Outcome convergence() {
  const ProbeResult r = convergence_probe(ProbeConfig{});
  const bool ok = !r.converged_at_init && r.slope <= -0.9 && r.residual <= 0.2;
  return {ok, "log-log slope " + fmt(r.slope) + ", residual " + fmt(r.residual)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  }
  return files;
}

Outcome determinism() {
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = fs::temp_directory_path() / (std::string("dora-acceptance-") + name);
    fs::remove_all(dir);
    std::ostringstream sink;
    for (const char* command : {"generate", "train", "sweep"}) {
      if (cli::run({command, "--out", dir.string()}, sink, sink) != cli::kExitOk) {
        return {false, std::string(command) + " failed: " + sink.str()};
      }
    }
    runs.push_back(snapshot(dir));
    fs::remove_all(dir);
  }
  return {runs[0] == runs[1] && !runs[0].empty(),
          std::to_string(runs[0].size()) + " files compared across two output directories"};
}

}  // namespace

int main() {
  unsetenv("DORA_LAB_SEED");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"dual-primal DRO equivalence", duality},
      {"tilted-form identity", tilt_identity},
      {"log-sum-exp limits", lse_limits},
      {"gradient exactness", gradients},
      {"Bayes-classifier recovery", bayes_recovery},
      {"calibration bound", calibration_bound},
      {"reduction identity", reduction_identity},
      {"mixture-shift trend", mixture_shift},
      {"corruption trend", corruption},
      {"lambda ablation trend", lambda_ablation},
      {"convergence rate", convergence},
      {"determinism", determinism},
  };
  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << " [" << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
