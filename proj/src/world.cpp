#include "dora/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dora {

namespace {

void normalize_row(std::span<double> row) {
  double sum = 0.0;
  for (double v : row) sum += v;
  for (double& v : row) v /= sum;
}

// Symmetric Dirichlet row; falls back to a fresh draw if every gamma underflows.
void dirichlet_row(std::span<double> row, double concentration, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  for (;;) {
    double sum = 0.0;
    for (double& v : row) {
      v = gamma(rng);
      sum += v;
    }
    if (sum > 0.0) break;
  }
  normalize_row(row);
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("world.") + name + " must lie in (0, inf)");
  }
}

World try_build(const WorldConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  World w;
  w.query_count = cfg.query_count;
  w.response_count = cfg.response_count;
  w.n_slots = cfg.n_slots;
  const std::size_t X = cfg.query_count;
  const std::size_t Y = cfg.response_count;

  if (cfg.mode == ComponentMode::kUniform) {
    w.components.assign(cfg.n_slots, Table(X, Y, 1.0 / static_cast<double>(Y)));
    w.golden = w.components[0];
    return w;
  }

  Table target(X, Y);
  for (std::size_t x = 0; x < X; ++x) dirichlet_row(target.row(x), cfg.target_sharpness, rng);
  w.components.push_back(target);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 1; j < cfg.n_slots; ++j) {
    Table q(X, Y);
    if (cfg.mode == ComponentMode::kTilted) {
      std::vector<double> tilt(Y);
      for (double& g : tilt) g = cfg.shift * normal(rng);
      for (std::size_t x = 0; x < X; ++x) {
        auto row = q.row(x);
        double top = -INFINITY;
        for (std::size_t y = 0; y < Y; ++y) {
          const double t = target(x, y);
          row[y] = t > 0.0 ? std::log(t) / cfg.synthetic_temperature + tilt[y] : -INFINITY;
          top = std::max(top, row[y]);
        }
        for (double& v : row) v = std::exp(v - top);
        normalize_row(row);
      }
    } else {
      for (std::size_t x = 0; x < X; ++x) {
        auto row = q.row(x);
        dirichlet_row(row, cfg.synthetic_sharpness, rng);
        for (std::size_t y = 0; y < Y; ++y) {
          row[y] = (1.0 - cfg.target_affinity) * row[y] + cfg.target_affinity * target(x, y);
        }
        normalize_row(row);
      }
    }
    w.components.push_back(std::move(q));
  }
  w.golden = w.components[0];
  return w;
}

bool distinguishable(const World& w, double floor) {
  for (std::size_t a = 0; a < w.components.size(); ++a) {
    for (std::size_t b = a + 1; b < w.components.size(); ++b) {
      if (mean_total_variation(w.components[a], w.components[b]) < floor) return false;
    }
  }
  return true;
}

}  // namespace

World World::from_tables(std::vector<Table> components, std::optional<Table> golden) {
  if (components.empty()) throw ConfigError("world needs at least one component table");
  World w;
  w.query_count = components[0].rows();
  w.response_count = components[0].cols();
  w.n_slots = components.size();
  w.golden_is_target = !golden.has_value();
  w.golden = golden ? std::move(*golden) : components[0];
  w.components = std::move(components);
  w.validate();
  return w;
}

void World::validate() const {
  if (n_slots < 2) throw ConfigError("world.n_slots must be >= 2");
  if (query_count < 1 || response_count < 1) throw ConfigError("world sizes must be positive");
  if (components.size() != n_slots) {
    throw ConfigError("world has " + std::to_string(components.size()) + " components for " +
                      std::to_string(n_slots) + " slots");
  }
  auto check = [&](const Table& t, const std::string& what) {
    if (t.rows() != query_count || t.cols() != response_count) {
      throw ConfigError(what + " has the wrong shape");
    }
    require_stochastic(t, what);
  };
  for (std::size_t j = 0; j < components.size(); ++j) check(components[j], "component " + std::to_string(j));
  check(golden, "golden");
  if (golden_is_target && !(golden == components[0])) {
    throw ConfigError("golden is flagged as the target but differs from component 0");
  }
}

World build_world(const WorldConfig& cfg) {
  if (cfg.query_count < 1 || cfg.response_count < 2) {
    throw ConfigError("world.query_count must be >= 1 and world.response_count >= 2");
  }
  if (cfg.n_slots < 2) throw ConfigError("world.n_slots must be >= 2");
  require_positive(cfg.target_sharpness, "target_sharpness");
  require_positive(cfg.synthetic_sharpness, "synthetic_sharpness");
  require_positive(cfg.synthetic_temperature, "synthetic_temperature");
  if (!(cfg.shift >= 0.0) || !std::isfinite(cfg.shift)) throw ConfigError("world.shift must be >= 0");
  if (!(cfg.target_affinity >= 0.0 && cfg.target_affinity <= 1.0)) {
    throw ConfigError("world.target_affinity must lie in [0, 1]");
  }
  const bool degenerate = cfg.allow_degenerate || cfg.mode == ComponentMode::kUniform;
  constexpr int kAttempts = 32;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt));
    World w = try_build(cfg, seed);
    if (degenerate || distinguishable(w, cfg.min_tv)) {
      w.validate();
      return w;
    }
  }
  throw ConfigError("could not draw a world whose components are separated by world.min_tv = " +
                    format_double(cfg.min_tv));
}

double mean_total_variation(const Table& a, const Table& b) {
  double total = 0.0;
  for (std::size_t x = 0; x < a.rows(); ++x) {
    double tv = 0.0;
    for (std::size_t y = 0; y < a.cols(); ++y) tv += std::abs(a(x, y) - b(x, y));
    total += 0.5 * tv;
  }
  return total / static_cast<double>(a.rows());
}

void MixtureSpec::validate(std::size_t n_slots) const {
  if (betas.size() + 1 != n_slots) {
    throw ConfigError("mixture.betas has " + std::to_string(betas.size()) + " entries, expected " +
                      std::to_string(n_slots - 1));
  }
  double sum = alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mixture.alpha must lie in [0, 1]");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] >= 0.0)) throw ConfigError("mixture.betas[" + std::to_string(i) + "] is negative");
    if (betas[i] > 1.0 / static_cast<double>(n_slots) + 1e-12) {
      throw ConfigError("mixture.betas[" + std::to_string(i) + "] exceeds 1/n_slots");
    }
    sum += betas[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("mixture.alpha + sum(mixture.betas) = " + format_double(sum) + ", expected 1");
  }
}

double MixtureSpec::mixture_weight(std::size_t slot) const {
  return slot == 0 ? alpha : betas.at(slot - 1);
}

double MixtureSpec::slot_target_probability(std::size_t slot, std::size_t n_slots) const {
  if (slot == 0) return alpha;
  return std::clamp(1.0 - static_cast<double>(n_slots) * betas.at(slot - 1), 0.0, 1.0);
}

void PreferenceDatum::validate(std::size_t n_slots) const {
  if (responses.size() != n_slots || source_labels.size() != n_slots || ranking.size() != n_slots) {
    throw ConfigError("datum arity does not match n_slots");
  }
  std::vector<std::size_t> sorted = ranking;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n_slots; ++i) {
    if (sorted[i] != i) throw ConfigError("datum ranking is not a permutation");
  }
  if (!rewards.empty()) {
    if (rewards.size() != n_slots) throw ConfigError("datum rewards arity does not match n_slots");
    for (std::size_t k = 1; k < n_slots; ++k) {
      if (rewards[ranking[k]] > rewards[ranking[k - 1]]) throw ConfigError("datum ranking disagrees with rewards");
    }
  }
}

std::vector<std::size_t> rank_by_rewards(const std::vector<double>& rewards) {
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
  return order;
}

PreferenceDatum sample_datum(const World& world, const MixtureSpec& spec, std::mt19937_64& rng,
                             const RewardFn& reward, const ResponseSource& synthetic) {
  spec.validate(world.n_slots);
  PreferenceDatum d;
  d.query = std::uniform_int_distribution<std::size_t>(0, world.query_count - 1)(rng);
  d.responses.resize(world.n_slots);
  d.source_labels.resize(world.n_slots);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t j = 0; j < world.n_slots; ++j) {
    const bool target = unit(rng) < spec.slot_target_probability(j, world.n_slots);
    d.source_labels[j] = target ? 1 : 0;
    if (!target && synthetic) {
      d.responses[j] = synthetic(d.query, j, rng);
    } else {
      const Table& table = target ? world.target() : world.components[MixtureSpec::designated_component(j)];
      d.responses[j] = sample_categorical(table.row(d.query), rng);
    }
  }
  if (reward) {
    d.rewards.resize(world.n_slots);
    for (std::size_t j = 0; j < world.n_slots; ++j) d.rewards[j] = reward(d.query, d.responses[j]);
    d.ranking = rank_by_rewards(d.rewards);
  } else {
    d.ranking.resize(world.n_slots);
    std::iota(d.ranking.begin(), d.ranking.end(), 0);
  }
  return d;
}

Dataset generate_dataset(const World& world, const MixtureSpec& spec, std::size_t size,
                         std::uint64_t seed, const RewardFn& reward, const ResponseSource& synthetic) {
  spec.validate(world.n_slots);
  Dataset ds;
  ds.spec = spec;
  ds.seed = seed;
  ds.data.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    ds.data.push_back(sample_datum(world, spec, rng, reward, synthetic));
  }
  return ds;
}

double mixture_density(const World& world, const MixtureSpec& spec, std::size_t x, std::size_t y) {
  if (x >= world.query_count || y >= world.response_count) {
    throw ConfigError("mixture_density: index out of range");
  }
  spec.validate(world.n_slots);
  double p = spec.alpha * world.components[0](x, y);
  for (std::size_t i = 1; i < world.n_slots; ++i) p += spec.betas[i - 1] * world.components[i](x, y);
  return p;
}

double bayes_posterior(const World& world, std::size_t slot, std::size_t x, std::size_t y,
                       double target_prior) {
  if (slot >= world.n_slots || x >= world.query_count || y >= world.response_count) {
    throw ConfigError("bayes_posterior: index out of range");
  }
  const double golden = target_prior * world.golden(x, y);
  const double other =
      (1.0 - target_prior) * world.components[MixtureSpec::designated_component(slot)](x, y);
  if (golden + other <= 0.0) {
    throw UndefinedPosterior("bayes_posterior: both class densities vanish at (" + std::to_string(x) +
                             ", " + std::to_string(y) + ")");
  }
  return golden / (golden + other);
}

double bayes_posterior(const World& world, const MixtureSpec& spec, std::size_t slot,
                       std::size_t x, std::size_t y) {
  return bayes_posterior(world, slot, x, y, spec.slot_target_probability(slot, world.n_slots));
}

Dataset corrupt_labels(const Dataset& dataset, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("corruption rate must lie in [0, 1]");
  Dataset out = dataset;
  const std::size_t n = dataset.size();
  const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(count, n));
  std::sort(order.begin(), order.end());
  for (std::size_t i : order) {
    PreferenceDatum& d = out.data[i];
    std::vector<std::size_t> reversed(d.ranking.rbegin(), d.ranking.rend());
    if (!d.rewards.empty()) {
      std::vector<double> rewards(d.rewards.size());
      for (std::size_t k = 0; k < reversed.size(); ++k) rewards[reversed[k]] = d.rewards[d.ranking[k]];
      d.rewards = std::move(rewards);
    }
    d.ranking = std::move(reversed);
  }
  out.corruption_rate = rate;
  out.corrupted_indices = std::move(order);
  return out;
}

}  // namespace dora
