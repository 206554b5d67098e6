#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dora/experiment.hpp"
#include "dora/io.hpp"
#include "dora/trainer.hpp"
#include "support.hpp"

using namespace dora;

namespace {

const MixtureSpec kSpec{0.5, {1.0 / 6, 1.0 / 6, 1.0 / 6}};

struct Fixture {
  World world;
  Dataset data;
  PolicyModel ref;
};

Fixture default_fixture(std::uint64_t seed, std::size_t size = 128) {
  WorldConfig wc;
  wc.seed = seed;
  Fixture f;
  f.world = build_world(wc);
  f.data = generate_dataset(f.world, kSpec, size, derive_seed(seed, "data"), make_reward_fn(f.world));
  f.ref = sft_train(f.data, 8, 8).policy;
  return f;
}

// Target rows are point masses, so moving toward the top-reward response is moving toward Q_0.
World point_mass_world(std::uint64_t seed) {
  WorldConfig wc;
  wc.seed = seed;
  const World base = build_world(wc);
  Table q0(8, 8, 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t x = 0; x < 8; ++x) q0(x, rng() % 8) = 1.0;
  std::vector<Table> components = base.components;
  components[0] = q0;
  return World::from_tables(components);
}

std::string policy_bytes(const PolicyModel& p) { return to_json(p).dump(); }

}  // namespace

TEST_CASE("run_phase1 returns one classifier per slot, deterministically") {
  // Slot 1 carries only target labels, so its classifier has a single class.
  Dataset d;
  d.spec = MixtureSpec{0.5, {0.25, 0.25}};
  for (int i = 0; i < 8; ++i) {
    PreferenceDatum p;
    p.query = static_cast<std::size_t>(i % 2);
    p.responses = {0, 1, static_cast<std::size_t>(i % 3)};
    p.source_labels = {static_cast<std::uint8_t>(i % 2), 1, static_cast<std::uint8_t>((i / 2) % 2)};
    p.ranking = {0, 1, 2};
    d.data.push_back(p);
  }
  ClassifierConfig cc;
  cc.epochs = 300;
  try {
    run_phase1(d, 2, 3, cc);
    FAIL("expected an error for the single-class slot");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("slot 1") != std::string::npos);
  }

  Fixture f = default_fixture(1, 200);
  const auto a = run_phase1(f.data, 8, 8, cc);
  const auto b = run_phase1(f.data, 8, 8, cc);
  REQUIRE(a.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(a[j].slot == j);
    CHECK(to_json(a[j]).dump() == to_json(b[j]).dump());
  }
}

TEST_CASE("ERM with the SFT loss concentrates on a constant preferred response") {
  Dataset d;
  d.spec = MixtureSpec{0.5, {0.5}};
  for (int i = 0; i < 64; ++i) d.data.push_back(test::make_datum(0, {3, static_cast<std::size_t>(i % 3)}, {1.0, 0.0}));
  TrainConfig tc;
  tc.loss_kind = LossKind::kSft;
  tc.aggregator = {AggregatorKind::kErm, 1.0};
  tc.epochs = 200;
  tc.early_stop_grad_norm = 0.0;
  const std::vector<double> h(d.size(), 1.0);
  const PolicyTrainResult r = train_policy(d, h, PolicyModel(1, 4).frozen_copy(), tc);
  CHECK(r.policy.probs(0)[3] >= 0.99);
}

TEST_CASE("training is bit-deterministic") {
  const Fixture f = default_fixture(2);
  TrainConfig tc;
  tc.seed = 11;
  tc.epochs = 5;
  std::vector<double> h(f.data.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.5 + 0.01 * static_cast<double>(i % 50);
  const PolicyTrainResult a = train_policy(f.data, h, f.ref, tc);
  const PolicyTrainResult b = train_policy(f.data, h, f.ref, tc);
  CHECK(policy_bytes(a.policy) == policy_bytes(b.policy));
  CHECK(training_log_csv(a.log, "h", 0) == training_log_csv(b.log, "h", 0));
  tc.seed = 12;
  CHECK(policy_bytes(train_policy(f.data, h, f.ref, tc).policy) != policy_bytes(a.policy));
}

TEST_CASE("h-tilde = 1 reduces DORA to DRO and REWEIGHT to ERM") {
  const Fixture f = default_fixture(3);
  const std::vector<double> ones(f.data.size(), 1.0);
  for (OptimizerKind opt : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    for (LossKind loss : {LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire}) {
      TrainConfig tc;
      tc.optimizer = opt;
      tc.step_size = opt == OptimizerKind::kAdam ? 0.01 : 0.5;
      tc.loss_kind = loss;
      tc.epochs = 4;
      tc.seed = 5;
      tc.aggregator = {AggregatorKind::kDora, 0.7};
      const PolicyTrainResult dora = train_policy(f.data, ones, f.ref, tc);
      tc.aggregator = {AggregatorKind::kDro, 0.7};
      const PolicyTrainResult dro = train_policy(f.data, ones, f.ref, tc);
      CHECK(policy_bytes(dora.policy) == policy_bytes(dro.policy));
      CHECK(training_log_csv(dora.log, "h", 0) == training_log_csv(dro.log, "h", 0));

      tc.aggregator = {AggregatorKind::kReweight, 0.7};
      const PolicyTrainResult reweight = train_policy(f.data, ones, f.ref, tc);
      tc.aggregator = {AggregatorKind::kErm, 0.7};
      const PolicyTrainResult erm = train_policy(f.data, ones, f.ref, tc);
      CHECK(policy_bytes(reweight.policy) == policy_bytes(erm.policy));
    }
  }
}

TEST_CASE("the applied step equals the aggregated gradient") {
  const Fixture f = default_fixture(4, 40);
  std::vector<double> h(f.data.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = 0.3 + 0.05 * static_cast<double>(i);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = f.data.size();  // one full batch, so the shuffle order is irrelevant
  tc.early_stop_grad_norm = 0.0;
  for (AggregatorKind kind : {AggregatorKind::kErm, AggregatorKind::kDro, AggregatorKind::kReweight, AggregatorKind::kDora}) {
    tc.aggregator = {kind, 0.8};
    const PolicyTrainResult r = train_policy(f.data, h, f.ref, tc);

    // Independent assembly: per-datum losses, softmax weights by hand, dense gradient.
    const PolicyModel start = f.ref.trainable_copy();
    std::vector<double> u;
    std::vector<LossValue> losses;
    for (const PreferenceDatum& d : f.data.data) {
      losses.push_back(evaluate_loss(tc.loss_kind, tc.loss_params, start, f.ref, d));
      u.push_back(losses.back().value);
    }
    const bool calibrated = kind == AggregatorKind::kReweight || kind == AggregatorKind::kDora;
    const bool robust = kind == AggregatorKind::kDro || kind == AggregatorKind::kDora;
    std::vector<double> z(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) z[i] = (calibrated ? h[i] : 1.0) * u[i] / 0.8;
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double v : z) total += std::exp(v - top);
    Table expected = start.logits();
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double omega = robust ? std::exp(z[i] - top) / total : 1.0 / static_cast<double>(u.size());
      const double coeff = omega * (calibrated ? h[i] : 1.0);
      for (std::size_t y = 0; y < 8; ++y) expected(losses[i].query, y) -= tc.step_size * coeff * losses[i].grad_row[y];
    }
    for (std::size_t k = 0; k < expected.size(); ++k) {
      CHECK(std::abs(r.policy.logits().values()[k] - expected.values()[k]) <= 1e-12);
    }
  }
}

TEST_CASE("ERM with the SFT loss is nonincreasing per epoch") {
  const Fixture f = default_fixture(5, 96);
  TrainConfig tc;
  tc.loss_kind = LossKind::kSft;
  tc.aggregator = {AggregatorKind::kErm, 1.0};
  tc.batch_size = f.data.size();
  const std::vector<double> h(f.data.size(), 1.0);
  const EpochObserver full_loss = [&](const PolicyModel& p) {
    double s = 0.0;
    for (const PreferenceDatum& d : f.data.data) s += sft_loss(p, d).value;
    return s / static_cast<double>(f.data.size());
  };
  const PolicyTrainResult r = train_policy(f.data, h, f.ref, tc, full_loss);
  REQUIRE(r.log.epochs.size() >= 2);
  for (std::size_t e = 1; e < r.log.epochs.size(); ++e) {
    CHECK(r.log.epochs[e].metric <= r.log.epochs[e - 1].metric + 1e-14);
  }
}

TEST_CASE("non-finite losses abort with the step and batch indices") {
  // A step this large drives the logits to infinity within a few updates.
  const Fixture f = default_fixture(6, 64);
  TrainConfig tc;
  tc.step_size = 1e308;
  tc.loss_kind = LossKind::kSft;
  tc.aggregator = {AggregatorKind::kErm, 1.0};
  const std::vector<double> h(f.data.size(), 1.0);
  try {
    train_policy(f.data, h, f.ref, tc);
    FAIL("expected a numeric abort");
  } catch (const NumericAbort& e) {
    CHECK(e.step() >= 1);
    CHECK_FALSE(e.indices().empty());
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("a downweighted adversarial datum leaves the policy closer to the target") {
  std::size_t closer = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const World w = point_mass_world(seed);
    Dataset d = generate_dataset(w, kSpec, 64, derive_seed(seed, "data"), make_reward_fn(w));
    // Datum 0 prefers a zero-density response over the target's mode.
    PreferenceDatum& p = d.data[0];
    const auto row = w.target().row(p.query);
    const std::size_t mode = std::max_element(row.begin(), row.end()) - row.begin();
    p.responses = {(mode + 1) % 8, mode, mode, mode};
    p.rewards = {1.0, 0.0, -1.0, -2.0};
    p.ranking = {0, 1, 2, 3};
    const PolicyModel ref = sft_train(d, 8, 8).policy;
    TrainConfig tc;
    tc.aggregator = {AggregatorKind::kDora, 1.0};
    tc.seed = seed;
    std::vector<double> h(d.size(), 1.0);
    const double trusted = policy_target_kl(train_policy(d, h, ref, tc).policy, w);
    h[0] = kCalibrationFloor;
    const double discounted = policy_target_kl(train_policy(d, h, ref, tc).policy, w);
    closer += discounted < trusted;
  }
  CHECK(closer >= 8);
}

TEST_CASE("self_train") {
  const World w = point_mass_world(0);
  SelfTrainConfig sc;
  sc.train = default_experiment_train();
  sc.train.epochs = 5;
  sc.dataset_size = 256;
  sc.eval_queries = 500;

  SUBCASE("one iteration equals Phase 1 + Phase 2 on policy-generated data") {
    const PolicyModel init = PolicyModel(8, 8).frozen_copy();
    const auto it = self_train(w, kSpec, init, 1, sc);
    REQUIRE(it.size() == 1);
    const std::uint64_t seed = derive_seed(sc.seed, std::uint64_t{0});
    const ResponseSource from_init = [&](std::size_t x, std::size_t, std::mt19937_64& rng) {
      return sample_response(init, x, rng);
    };
    const Dataset data = generate_dataset(w, kSpec, sc.dataset_size, seed, make_reward_fn(w), from_init);
    ClassifierConfig cc = sc.classifier;
    cc.seed = derive_seed(seed, "classifier");
    TrainConfig tc = sc.train;
    tc.seed = derive_seed(seed, "train");
    const Phase2Result manual = run_phase2(data, run_phase1(data, 8, 8, cc), init, tc);
    CHECK(policy_bytes(it[0].policy.trainable_copy()) == policy_bytes(manual.policy.trainable_copy()));
  }
  SUBCASE("metrics list length equals the iteration count") {
    CHECK(self_train(w, kSpec, PolicyModel(8, 8), 3, sc).size() == 3);
    CHECK_THROWS_AS(self_train(w, kSpec, PolicyModel(8, 8), 0, sc), ConfigError);
  }
}

TEST_CASE("self-training does not worsen target KL on a well-separated world") {
  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const World w = point_mass_world(seed);
    SelfTrainConfig sc;
    sc.seed = seed;
    sc.train = default_experiment_train();
    sc.train.epochs = 5;
    sc.eval_queries = 200;
    const auto it = self_train(w, kSpec, PolicyModel(8, 8).frozen_copy(), 3, sc);
    ok += it[1].target_kl <= it[0].target_kl && it[2].target_kl <= it[1].target_kl;
  }
  CHECK(ok >= 7);
}

TEST_CASE("convergence probe") {
  SUBCASE("log-uniform quadratic spectrum decays as 1/T") {
    // Eigenvalues spread log-uniformly make the GD optimality gap ∝ 1/T over many decades.
    const std::size_t n = 200;
    std::vector<double> lam(n);
    for (std::size_t i = 0; i < n; ++i) lam[i] = std::pow(10.0, -7.0 + 7.0 * static_cast<double>(i) / (n - 1));
    ConvexObjective q;
    q.value = [&](const std::vector<double>& x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += 0.5 * lam[i] * x[i] * x[i];
      return s;
    };
    q.gradient = [&](const std::vector<double>& x) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = lam[i] * x[i];
      return g;
    };
    q.init.assign(n, 1.0);
    q.step_size = 1.0;
    const ProbeResult r = convergence_probe(q, {100, 1000, 10000}, 200000);
    CHECK(r.slope <= -0.9);
    CHECK_FALSE(r.converged_at_init);

    q.init.assign(n, 0.0);
    const ProbeResult at_opt = convergence_probe(q, {100, 1000}, 10000);
    CHECK(at_opt.converged_at_init);
    for (double g : at_opt.gaps) CHECK(g == doctest::Approx(0.0));
  }
  SUBCASE("short default probe") {
    ProbeConfig pc;
    pc.horizons = {100, 1000};
    pc.reference_multiplier = 100;
    const ProbeResult r = convergence_probe(pc);
    CHECK(r.slope <= -0.9);
    CHECK(r.step_size > 0.0);
  }
  SUBCASE("non-convex loss kinds are rejected") {
    ProbeConfig pc;
    pc.loss_kind = LossKind::kDpoPl;
    CHECK_THROWS_AS(convergence_probe(pc), ConfigError);
  }
}

TEST_CASE("optimizer names round-trip") {
  CHECK(parse_optimizer_kind("adam") == OptimizerKind::kAdam);
  CHECK(parse_optimizer_kind(to_string(OptimizerKind::kSgd)) == OptimizerKind::kSgd);
  CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate(1000));
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(1000), ConfigError);
  tc = TrainConfig{};
  tc.aggregator.lambda = 0.0;
  CHECK_THROWS_AS(tc.validate(1000), ConfigError);
  tc = TrainConfig{};
  tc.corruption_rate = 1.5;
  CHECK_THROWS_AS(tc.validate(1000), ConfigError);
}
