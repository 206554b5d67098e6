#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dora/world.hpp"

namespace dora {

class FrozenPolicyError : public Error {
 public:
  using Error::Error;
};

// Tabular softmax policy π_θ(y|x) with one logit per (query, response).
class PolicyModel {
 public:
  PolicyModel() = default;
  PolicyModel(std::size_t query_count, std::size_t response_count);
  explicit PolicyModel(Table logits);

  static PolicyModel from_probabilities(const Table& probs);

  std::size_t query_count() const { return logits_.rows(); }
  std::size_t response_count() const { return logits_.cols(); }
  const Table& logits() const { return logits_; }

  bool frozen() const { return frozen_; }
  PolicyModel frozen_copy() const;
  PolicyModel trainable_copy() const;

  double log_prob(std::size_t x, std::size_t y) const;
  std::vector<double> log_probs(std::size_t x) const;
  std::vector<double> probs(std::size_t x) const;

  // θ ← θ - step · gradient. Throws FrozenPolicyError on a frozen policy.
  void apply_gradient(const Table& gradient, double step);
  void set_logits(Table logits);

  // Provenance carried into serialized checkpoints.
  std::uint64_t seed = 0;
  std::string config_hash;

  bool operator==(const PolicyModel&) const = default;

 private:
  void require_trainable() const;

  Table logits_;
  bool frozen_ = false;
};

// Max-subtracted log-softmax of a logits row.
std::vector<double> log_softmax(std::span<const double> logits);

struct SftConfig {
  double learning_rate = 2.0;
  std::size_t epochs = 300;
};

struct SftResult {
  PolicyModel policy;                // frozen
  std::vector<double> loss_history;  // mean negative log-likelihood per epoch, plus the final value
};

// Full-batch gradient ascent on the mean log-likelihood of each datum's top-ranked response.
SftResult sft_train(const Dataset& dataset, std::size_t query_count, std::size_t response_count,
                    const SftConfig& config = {});

std::size_t sample_response(const PolicyModel& policy, std::size_t x, std::mt19937_64& rng);

}  // namespace dora
