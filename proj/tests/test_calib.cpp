#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dora/calib.hpp"
#include "dora/io.hpp"
#include "support.hpp"

using namespace dora;
using dora::test::rows_table;

namespace {

ClassifierModel constant_model(std::size_t slot, double bias, double gamma = 1.0, double eps = 1e-4) {
  ClassifierModel m;
  m.slot = slot;
  m.query_count = 2;
  m.response_count = 2;
  m.weights.assign(feature_dimension(FeatureEncoding::kAdditive, 2, 2), 0.0);
  m.weights.back() = bias;
  m.imbalance_ratio = gamma;
  m.epsilon_clamp = eps;
  return m;
}

PreferenceDatum pair_datum() {
  PreferenceDatum d;
  d.query = 0;
  d.responses = {0, 1};
  d.source_labels = {1, 0};
  d.ranking = {0, 1};
  return d;
}

}  // namespace

TEST_CASE("featurize one-hot layout") {
  CHECK(featurize(0, 0, 2, 2) == std::vector<double>{1, 0, 1, 0, 1});
  CHECK(featurize(1, 0, 2, 2) == std::vector<double>{0, 1, 1, 0, 1});
  CHECK(featurize(1, 1, 2, 2) == featurize(1, 1, 2, 2));
  std::set<std::vector<double>> seen;
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t y = 0; y < 4; ++y) seen.insert(featurize(x, y, 4, 4));
  }
  CHECK(seen.size() == 16);
  CHECK(featurize(1, 2, 3, 4, FeatureEncoding::kJoint).size() == feature_dimension(FeatureEncoding::kJoint, 3, 4));
}

TEST_CASE("predict_proba examples") {
  CHECK(predict_proba(constant_model(0, 0.0), 0, 0) == 0.5);
  CHECK(predict_proba(constant_model(0, 1e6), 1, 1) == 1.0 - 1e-4);
  CHECK(predict_proba(constant_model(0, -1e6), 1, 1) == 1e-4);
  CHECK(predict_proba(constant_model(0, std::log(2.0)), 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("importance_weight examples") {
  CHECK(importance_weight(constant_model(1, 0.0), 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(importance_weight(constant_model(1, std::log(2.0)), 0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(importance_weight(constant_model(1, 0.0, 3.0), 0, 0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("balanced slot labels give gamma = 1") {
  Dataset d;
  d.spec = MixtureSpec{0.5, {0.25, 0.25}};
  for (int i = 0; i < 8; ++i) {
    PreferenceDatum p;
    p.query = static_cast<std::size_t>(i % 2);
    p.responses = {0, static_cast<std::size_t>(i % 3), 1};
    p.source_labels = {1, static_cast<std::uint8_t>(i % 2), 0};
    p.ranking = {0, 1, 2};
    d.data.push_back(p);
  }
  CHECK(train_classifier(d, 1, 2, 3).imbalance_ratio == 1.0);
  CHECK_THROWS_AS(train_classifier(d, 0, 2, 3), ConfigError);  // slot 0 is all-target here
}

TEST_CASE("separable slot data is classified perfectly") {
  // Target on responses {0,1}, synthetic on {2,3}: the Bayes posterior is 1 or 0.
  const World w = World::from_tables({rows_table({{0.5, 0.5, 0.0, 0.0}, {0.3, 0.7, 0.0, 0.0}}),
                                      rows_table({{0.0, 0.0, 0.5, 0.5}, {0.0, 0.0, 0.2, 0.8}})});
  const MixtureSpec spec{0.75, {0.25}};
  const Dataset d = generate_dataset(w, spec, 4000, 3);
  const ClassifierModel m = train_classifier(d, 1, 2, 4);
  std::size_t correct = 0;
  for (const PreferenceDatum& p : d.data) {
    const bool predicted = predict_proba(m, p.query, p.responses[1]) > 0.5;
    correct += predicted == (p.source_labels[1] == 1);
  }
  CHECK(static_cast<double>(correct) / d.size() >= 0.99);
  for (std::size_t x = 0; x < 2; ++x) {
    for (std::size_t y = 0; y < 4; ++y) {
      const double bayes = bayes_posterior(w, 1, x, y, 0.5);
      CHECK(std::abs(predict_proba(m, x, y) - bayes) < 0.05);
    }
  }
}

TEST_CASE("importance weight approaches the true density ratio") {
  // P_golden(y=0) = 0.8, Q_1(y=0) = 0.4, slot 1 balanced: ratio 2 at y=0 and 1/3 at y=1.
  const World w = World::from_tables({rows_table({{0.8, 0.2}}), rows_table({{0.4, 0.6}})});
  const MixtureSpec spec{0.75, {0.25}};
  const Dataset d = generate_dataset(w, spec, 50000, 17);
  const ClassifierModel m = train_classifier(d, 1, 1, 2);
  CHECK(std::abs(importance_weight(m, 0, 0) / 2.0 - 1.0) <= 0.05);
  CHECK(std::abs(importance_weight(m, 0, 1) / (1.0 / 3.0) - 1.0) <= 0.05);
}

TEST_CASE("classifier training is deterministic") {
  WorldConfig wc;
  const World w = build_world(wc);
  const MixtureSpec spec{0.5, {1.0 / 6, 1.0 / 6, 1.0 / 6}};
  const Dataset d = generate_dataset(w, spec, 300, 1);
  ClassifierConfig cc;
  cc.epochs = 200;
  CHECK(to_json(train_classifier(d, 2, 8, 8, cc)).dump() == to_json(train_classifier(d, 2, 8, 8, cc)).dump());
}

TEST_CASE("calibration_factor examples") {
  const MixtureSpec spec{0.5, {0.5}};
  const PreferenceDatum d = pair_datum();

  SUBCASE("hand-evaluated stabilized formula") {
    const CalibrationRecord r = calibration_factor({constant_model(0, 0.0), constant_model(1, 0.0)}, spec, d);
    // t = 1 * 0.5 / (0.5 * 0.5 + 1/2) = 2/3 for both slots.
    CHECK(r.per_slot_terms[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.per_slot_terms[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.h_tilde == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("certain 'not target' classifiers hit the floor") {
    const CalibrationRecord r =
        calibration_factor({constant_model(0, -1e3, 1.0, 1e-12), constant_model(1, -1e3, 1.0, 1e-12)}, spec, d);
    CHECK(r.h_tilde == kCalibrationFloor);
    const CalibrationRecord loose = calibration_factor({constant_model(0, -1e3), constant_model(1, -1e3)}, spec, d);
    CHECK(loose.h_tilde < 2.1e-4);
  }
  SUBCASE("zero mixture weight is a configuration error") {
    const MixtureSpec degenerate{1.0, {0.0}};
    CHECK_THROWS_AS(calibration_factor({constant_model(0, 0.0), constant_model(1, 0.0)}, degenerate, d), ConfigError);
  }
}

TEST_CASE("h-tilde stays inside (0, n) on random inputs") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> bias(-40.0, 40.0);
  std::uniform_real_distribution<double> gamma(0.01, 100.0);
  std::uniform_int_distribution<int> slots(2, 6);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(slots(rng));
    MixtureSpec spec;
    spec.alpha = 0.5;
    spec.betas.assign(n - 1, 0.5 / static_cast<double>(n - 1));
    std::vector<ClassifierModel> models;
    PreferenceDatum d;
    d.query = 0;
    for (std::size_t j = 0; j < n; ++j) {
      models.push_back(constant_model(j, bias(rng), gamma(rng)));
      d.responses.push_back(j % 2);
      d.source_labels.push_back(0);
      d.ranking.push_back(j);
    }
    const double h = calibration_factor(models, spec, d).h_tilde;
    REQUIRE(h > 0.0);
    REQUIRE(h < static_cast<double>(n));
  }
}

TEST_CASE("precompute_calibration") {
  WorldConfig wc;
  const World w = build_world(wc);
  const MixtureSpec spec{0.5, {1.0 / 6, 1.0 / 6, 1.0 / 6}};
  const Dataset d = generate_dataset(w, spec, 200, 4);
  ClassifierConfig cc;
  cc.epochs = 300;
  std::vector<ClassifierModel> models;
  for (std::size_t j = 0; j < 4; ++j) models.push_back(train_classifier(d, j, 8, 8, cc));

  CHECK(precompute_calibration(Dataset{}, models, spec).empty());

  const auto a = precompute_calibration(d, models, spec);
  const auto b = precompute_calibration(d, models, spec);
  REQUIRE(a.size() == d.size());
  CHECK(a == b);

  Dataset reversed = d;
  std::reverse(reversed.data.begin(), reversed.data.end());
  const auto r = precompute_calibration(reversed, models, spec);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(r[i].h_tilde == a[d.size() - 1 - i].h_tilde);
    CHECK(r[i].per_slot_terms == a[d.size() - 1 - i].per_slot_terms);
  }
}
