#include "dora/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dora {

PolicyModel::PolicyModel(std::size_t X, std::size_t Y) : logits_(X, Y, 0.0) {}

PolicyModel::PolicyModel(Table logits) : logits_(std::move(logits)) {
  for (double v : logits_.values()) {
    if (!std::isfinite(v)) throw ConfigError("policy logits must be finite");
  }
}

PolicyModel PolicyModel::from_probabilities(const Table& probs) {
  // Zero-probability responses get a very negative but finite logit.
  Table logits(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs.values()[i];
    logits.values()[i] = p > 0.0 ? std::log(p) : std::log(1e-300);
  }
  return PolicyModel(std::move(logits));
}

PolicyModel PolicyModel::frozen_copy() const {
  PolicyModel p = *this;
  p.frozen_ = true;
  return p;
}

PolicyModel PolicyModel::trainable_copy() const {
  PolicyModel p = *this;
  p.frozen_ = false;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - top);
  const double lse = top + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double PolicyModel::log_prob(std::size_t x, std::size_t y) const {
  if (x >= query_count() || y >= response_count()) throw ConfigError("log_prob: index out of range");
  return log_softmax(logits_.row(x))[y];
}

std::vector<double> PolicyModel::log_probs(std::size_t x) const {
  if (x >= query_count()) throw ConfigError("log_probs: query out of range");
  return log_softmax(logits_.row(x));
}

std::vector<double> PolicyModel::probs(std::size_t x) const {
  std::vector<double> lp = log_probs(x);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

void PolicyModel::require_trainable() const {
  if (frozen_) throw FrozenPolicyError("policy is frozen; parameter updates are rejected");
}

void PolicyModel::apply_gradient(const Table& gradient, double step) {
  require_trainable();
  if (gradient.rows() != logits_.rows() || gradient.cols() != logits_.cols()) {
    throw ConfigError("gradient shape does not match the policy");
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_.values()[i] -= step * gradient.values()[i];
}

void PolicyModel::set_logits(Table logits) {
  require_trainable();
  if (logits.rows() != logits_.rows() || logits.cols() != logits_.cols()) {
    throw ConfigError("logits shape does not match the policy");
  }
  logits_ = std::move(logits);
}

SftResult sft_train(const Dataset& dataset, std::size_t X, std::size_t Y, const SftConfig& config) {
  if (dataset.data.empty()) throw ConfigError("sft_train: empty dataset");
  if (!(config.learning_rate > 0.0)) throw ConfigError("sft.learning_rate must be positive");
  Table counts(X, Y, 0.0);
  for (const PreferenceDatum& d : dataset.data) {
    if (d.ranking.empty()) throw ConfigError("sft_train: datum without a ranking");
    counts(d.query, d.preferred_response()) += 1.0;
  }
  const double n = static_cast<double>(dataset.size());

  PolicyModel policy(X, Y);
  SftResult result;
  result.loss_history.reserve(config.epochs + 1);
  Table grad(X, Y);
  for (std::size_t epoch = 0;; ++epoch) {
    double loss = 0.0;
    for (std::size_t x = 0; x < X; ++x) {
      const std::vector<double> lp = policy.log_probs(x);
      double row_total = 0.0;
      for (std::size_t y = 0; y < Y; ++y) row_total += counts(x, y);
      for (std::size_t y = 0; y < Y; ++y) {
        loss -= counts(x, y) * lp[y];
        grad(x, y) = (row_total * std::exp(lp[y]) - counts(x, y)) / n;
      }
    }
    result.loss_history.push_back(loss / n);
    if (epoch == config.epochs) break;
    policy.apply_gradient(grad, config.learning_rate);
  }
  result.policy = policy.frozen_copy();
  return result;
}

std::size_t sample_response(const PolicyModel& policy, std::size_t x, std::mt19937_64& rng) {
  const std::vector<double> p = policy.probs(x);
  return sample_categorical(p, rng);
}

}  // namespace dora
