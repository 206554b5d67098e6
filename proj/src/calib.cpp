#include "dora/calib.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dora {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow.
double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

// Active coordinates of a one-hot style encoding; every active coordinate has value 1.
std::vector<std::size_t> active_features(std::size_t x, std::size_t y, std::size_t X, std::size_t Y,
                                         FeatureEncoding enc) {
  std::vector<std::size_t> idx{x, X + y, X + Y};
  if (enc == FeatureEncoding::kJoint) idx.push_back(X + Y + 1 + x * Y + y);
  return idx;
}

}  // namespace

std::size_t feature_dimension(FeatureEncoding enc, std::size_t X, std::size_t Y) {
  return enc == FeatureEncoding::kJoint ? X + Y + 1 + X * Y : X + Y + 1;
}

std::vector<double> featurize(std::size_t x, std::size_t y, std::size_t X, std::size_t Y,
                              FeatureEncoding enc) {
  if (x >= X || y >= Y) throw ConfigError("featurize: index out of range");
  std::vector<double> f(feature_dimension(enc, X, Y), 0.0);
  for (std::size_t i : active_features(x, y, X, Y, enc)) f[i] = 1.0;
  return f;
}

double ClassifierModel::score(std::size_t x, std::size_t y) const {
  if (x >= query_count || y >= response_count) throw ConfigError("classifier: index out of range");
  double s = 0.0;
  for (std::size_t i : active_features(x, y, query_count, response_count, encoding)) s += weights[i];
  return s;
}

ClassifierModel train_classifier(const Dataset& dataset, std::size_t slot, std::size_t X,
                                 std::size_t Y, const ClassifierConfig& config) {
  if (!(config.epsilon_clamp > 0.0 && config.epsilon_clamp < 0.5)) {
    throw ConfigError("classifier.epsilon_clamp must lie in (0, 0.5)");
  }
  if (!(config.learning_rate > 0.0)) throw ConfigError("classifier.learning_rate must be positive");

  // Full-batch gradient descent only needs per-cell label counts.
  std::vector<double> pos(X * Y, 0.0);
  std::vector<double> neg(X * Y, 0.0);
  double n_pos = 0.0;
  double n_neg = 0.0;
  for (const PreferenceDatum& d : dataset.data) {
    if (slot >= d.responses.size()) throw ConfigError("classifier slot out of range");
    const std::size_t cell = d.query * Y + d.responses[slot];
    if (d.source_labels[slot]) {
      pos[cell] += 1.0;
      n_pos += 1.0;
    } else {
      neg[cell] += 1.0;
      n_neg += 1.0;
    }
  }
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw ConfigError("slot " + std::to_string(slot) + " has only " +
                      (n_pos == 0.0 ? "non-target" : "target") + " labels; cannot train its classifier");
  }

  ClassifierModel m;
  m.slot = slot;
  m.query_count = X;
  m.response_count = Y;
  m.encoding = config.encoding;
  m.epsilon_clamp = config.epsilon_clamp;
  m.imbalance_ratio = n_neg / n_pos;
  m.weights.assign(feature_dimension(config.encoding, X, Y), 0.0);

  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < X * Y; ++c) {
    if (pos[c] + neg[c] > 0.0) cells.push_back(c);
  }
  std::vector<std::vector<std::size_t>> active(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    active[k] = active_features(cells[k] / Y, cells[k] % Y, X, Y, config.encoding);
  }

  const double n_total = n_pos + n_neg;
  std::vector<double> grad(m.weights.size());
  m.loss_history.reserve(config.epochs + 1);
  for (std::size_t epoch = 0;; ++epoch) {
    double loss = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      double s = 0.0;
      for (std::size_t i : active[k]) s += m.weights[i];
      const std::size_t c = cells[k];
      loss += pos[c] * softplus(-s) + neg[c] * softplus(s);
      const double g = (pos[c] + neg[c]) * sigmoid(s) - pos[c];
      for (std::size_t i : active[k]) grad[i] += g;
    }
    loss /= n_total;
    if (!std::isfinite(loss)) {
      throw NumericError("classifier for slot " + std::to_string(slot) + " reached a non-finite loss");
    }
    m.loss_history.push_back(loss);
    if (epoch == config.epochs) break;
    for (std::size_t i = 0; i < grad.size(); ++i) m.weights[i] -= config.learning_rate * grad[i] / n_total;
  }
  return m;
}

double predict_proba(const ClassifierModel& model, std::size_t x, std::size_t y) {
  return std::clamp(sigmoid(model.score(x, y)), model.epsilon_clamp, 1.0 - model.epsilon_clamp);
}

double importance_weight(const ClassifierModel& model, std::size_t x, std::size_t y) {
  const double c = predict_proba(model, x, y);
  return model.imbalance_ratio * c / (1.0 - c);
}

double calibration_term(double c, double gamma, double m, std::size_t n_slots) {
  return gamma * c / (m * (1.0 - c) + 1.0 / static_cast<double>(n_slots));
}

CalibrationRecord calibration_factor(const std::vector<ClassifierModel>& models,
                                     const MixtureSpec& spec, const PreferenceDatum& datum,
                                     std::size_t datum_index) {
  const std::size_t n = models.size();
  if (datum.responses.size() != n) {
    throw ConfigError("calibration_factor: " + std::to_string(n) + " classifiers for a datum with " +
                      std::to_string(datum.responses.size()) + " responses");
  }
  spec.validate(n);
  CalibrationRecord rec;
  rec.datum_index = datum_index;
  rec.per_slot_terms.resize(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = spec.mixture_weight(j);
    if (!(m > 0.0)) {
      throw ConfigError("calibration_factor: mixture weight of slot " + std::to_string(j) + " is zero");
    }
    const double c = predict_proba(models[j], datum.query, datum.responses[j]);
    rec.per_slot_terms[j] = calibration_term(c, models[j].imbalance_ratio, m, n);
    sum += rec.per_slot_terms[j];
  }
  const double nd = static_cast<double>(n);
  rec.h_tilde = std::clamp(sum / nd, kCalibrationFloor, nd - kCalibrationFloor);
  return rec;
}

std::vector<CalibrationRecord> precompute_calibration(const Dataset& dataset,
                                                      const std::vector<ClassifierModel>& models,
                                                      const MixtureSpec& spec) {
  std::vector<CalibrationRecord> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.push_back(calibration_factor(models, spec, dataset.data[i], i));
  }
  return out;
}

std::vector<double> calibration_values(const std::vector<CalibrationRecord>& records) {
  std::vector<double> h;
  h.reserve(records.size());
  for (const auto& r : records) h.push_back(r.h_tilde);
  return h;
}

}  // namespace dora
