#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "dora/common.hpp"

namespace dora {

// How the synthetic components Q_1..Q_{n-1} are derived.
enum class ComponentMode {
  // Q_j(y|x) ∝ Q_0(y|x)^(1/temperature) · exp(shift · g_j(y)), g_j ~ N(0,1) per response.
  // With temperature 1 the target/synthetic log-odds are additive in (x, y).
  kTilted,
  // Q_j = (1 - affinity) · Dirichlet(synthetic_sharpness) + affinity · Q_0.
  kDirichlet,
  // Every row uniform. Always degenerate.
  kUniform,
};

struct WorldConfig {
  std::size_t query_count = 8;
  std::size_t response_count = 8;
  std::size_t n_slots = 4;
  ComponentMode mode = ComponentMode::kTilted;
  double target_sharpness = 2.0;     // Dirichlet concentration of Q_0 rows
  double synthetic_sharpness = 1.0;  // kDirichlet only
  double target_affinity = 0.0;      // kDirichlet only, in [0, 1]
  double synthetic_temperature = 2.0;  // kTilted only; > 1 flattens toward low-reward responses
  double shift = 1.0;                  // kTilted only
  double min_tv = 0.05;  // pairwise mean total-variation floor between components
  bool allow_degenerate = false;
  std::uint64_t seed = 0;
};

// Discrete environment with exact conditional tables. components[0] is the target Q_0.
struct World {
  std::size_t query_count = 0;
  std::size_t response_count = 0;
  std::size_t n_slots = 0;
  std::vector<Table> components;
  Table golden;
  bool golden_is_target = true;

  const Table& target() const { return components.at(0); }

  // Builds a world from explicit tables; golden defaults to components[0].
  static World from_tables(std::vector<Table> components, std::optional<Table> golden = std::nullopt);
  void validate() const;

  bool operator==(const World&) const = default;
};

World build_world(const WorldConfig& config);

// Mean over queries of the total-variation distance between two conditional tables.
double mean_total_variation(const Table& a, const Table& b);

// Mixture weights of the response-level mixture: α for Q_0, β_i for Q_i.
struct MixtureSpec {
  double alpha = 1.0;
  std::vector<double> betas;

  void validate(std::size_t n_slots) const;

  // Mixture weight m_j used by the calibration factor: α for slot 0, β_j otherwise.
  double mixture_weight(std::size_t slot) const;
  // Probability that slot j draws from the target. Slot 0 uses α; slot j ≥ 1 uses
  // 1 - n·β_j so the slot-averaged draw distribution reproduces the global mixture.
  double slot_target_probability(std::size_t slot, std::size_t n_slots) const;
  // Component a slot falls back to when it does not draw from the target.
  static std::size_t designated_component(std::size_t slot) { return slot; }

  bool operator==(const MixtureSpec&) const = default;
};

struct PreferenceDatum {
  std::size_t query = 0;
  std::vector<std::size_t> responses;
  std::vector<std::uint8_t> source_labels;  // 1 = drawn from the target
  std::vector<double> rewards;              // empty until scored
  std::vector<std::size_t> ranking;         // slots ordered best-first

  std::size_t preferred_response() const { return responses.at(ranking.at(0)); }
  void validate(std::size_t n_slots) const;

  bool operator==(const PreferenceDatum&) const = default;
};

struct Dataset {
  std::vector<PreferenceDatum> data;
  MixtureSpec spec;
  std::uint64_t seed = 0;
  double corruption_rate = 0.0;
  std::vector<std::size_t> corrupted_indices;

  std::size_t size() const { return data.size(); }
  bool operator==(const Dataset&) const = default;
};

using RewardFn = std::function<double(std::size_t query, std::size_t response)>;
// Draws a non-target response for (query, slot); replaces the slot's designated component.
using ResponseSource =
    std::function<std::size_t(std::size_t query, std::size_t slot, std::mt19937_64& rng)>;

// Ranks slots by descending reward, ties broken by ascending slot index.
std::vector<std::size_t> rank_by_rewards(const std::vector<double>& rewards);

// Uniform query, then one Bernoulli target draw per slot. Rewards are filled when a
// reward function is supplied; otherwise ranking is the identity.
PreferenceDatum sample_datum(const World& world, const MixtureSpec& spec, std::mt19937_64& rng,
                             const RewardFn& reward = {}, const ResponseSource& synthetic = {});

// Datum i is drawn from its own stream derive_seed(seed, i).
Dataset generate_dataset(const World& world, const MixtureSpec& spec, std::size_t size,
                         std::uint64_t seed, const RewardFn& reward = {},
                         const ResponseSource& synthetic = {});

double mixture_density(const World& world, const MixtureSpec& spec, std::size_t x, std::size_t y);

class UndefinedPosterior : public NumericError {
 public:
  using NumericError::NumericError;
};

// Exact posterior that (x, y) seen in `slot` came from the golden class rather than the
// slot's designated component, under prior `target_prior`.
double bayes_posterior(const World& world, std::size_t slot, std::size_t x, std::size_t y,
                       double target_prior);
// Same, with the slot's target probability from the mixture as prior.
double bayes_posterior(const World& world, const MixtureSpec& spec, std::size_t slot,
                       std::size_t x, std::size_t y);

// Reverses the ranking (and permutes rewards to match) on floor(rate·N) uniformly chosen data.
Dataset corrupt_labels(const Dataset& dataset, double rate, std::mt19937_64& rng);

}  // namespace dora
