#include "dora/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dora {

namespace {

// Converts per-slot sensitivities d value / d log π(y_j|x) into a logits-row gradient:
// d log π(y|x) / d θ_x = e_y - softmax(θ_x).
std::vector<double> chain_to_logits(const std::vector<double>& log_probs,
                                    const std::vector<std::size_t>& responses,
                                    const std::vector<double>& slot_sens) {
  std::vector<double> g(log_probs.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < responses.size(); ++j) {
    g[responses[j]] += slot_sens[j];
    total += slot_sens[j];
  }
  for (std::size_t y = 0; y < g.size(); ++y) g[y] -= total * std::exp(log_probs[y]);
  return g;
}

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_trainable(const PolicyModel& policy) {
  if (policy.frozen()) throw FrozenPolicyError("a frozen policy was passed as the trainable policy");
}

void require_ranked(const PreferenceDatum& d) {
  if (d.ranking.size() != d.responses.size() || d.responses.empty()) {
    throw ConfigError("datum needs a ranking over its responses");
  }
}

void require_rewards(const PreferenceDatum& d) {
  if (d.rewards.size() != d.responses.size()) throw ConfigError("datum has no rewards");
  for (double r : d.rewards) {
    if (!std::isfinite(r)) throw NumericError("datum has a non-finite reward");
  }
}

// s_j = log π_θ(y_j|x) - log π_ref(y_j|x) per slot.
std::vector<double> log_ratios(const std::vector<double>& lp, const std::vector<double>& lp_ref,
                               const PreferenceDatum& d) {
  std::vector<double> s(d.responses.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = lp[d.responses[j]] - lp_ref[d.responses[j]];
  return s;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kDpoPair: return "dpo";
    case LossKind::kDpoPl: return "dpo_pl";
    case LossKind::kRrhf: return "rrhf";
    case LossKind::kLire: return "lire";
    case LossKind::kSft: return "sft";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::kDpoPair, LossKind::kDpoPl, LossKind::kRrhf, LossKind::kLire, LossKind::kSft}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

void LossParams::validate() const {
  if (!(beta > 0.0)) throw ConfigError("loss.beta must be positive");
  if (!(temperature > 0.0)) throw ConfigError("loss.temperature must be positive");
  if (!(alpha_sft >= 0.0)) throw ConfigError("loss.alpha_sft must be nonnegative");
}

Table LossValue::dense_gradient(std::size_t query_count) const {
  Table g(query_count, grad_row.size(), 0.0);
  std::copy(grad_row.begin(), grad_row.end(), g.row(query).begin());
  return g;
}

double reward_oracle(const World& world, std::size_t x, std::size_t y, const RewardConfig& config) {
  if (x >= world.query_count || y >= world.response_count) throw ConfigError("reward_oracle: index out of range");
  const double q = world.target()(x, y);
  if (q <= 0.0) return config.floor;
  return config.scale * std::log(q) + config.offset;
}

RewardFn make_reward_fn(const World& world, const RewardConfig& config) {
  return [&world, config](std::size_t x, std::size_t y) { return reward_oracle(world, x, y, config); };
}

LossValue dpo_pair_loss(const PolicyModel& policy, const PolicyModel& ref, const PreferenceDatum& d, double beta) {
  require_trainable(policy);
  require_ranked(d);
  if (d.responses.size() < 2) throw ConfigError("dpo_pair_loss needs at least two responses");
  const std::vector<double> lp = policy.log_probs(d.query);
  const std::vector<double> s = log_ratios(lp, ref.log_probs(d.query), d);
  const std::size_t win = d.ranking.front();
  const std::size_t lose = d.ranking.back();
  const double z = beta * (s[win] - s[lose]);
  LossValue out;
  out.query = d.query;
  out.value = -log_sigmoid(z);
  std::vector<double> sens(d.responses.size(), 0.0);
  const double dz = -sigmoid(-z) * beta;
  sens[win] += dz;
  sens[lose] -= dz;
  out.grad_row = chain_to_logits(lp, d.responses, sens);
  return out;
}

LossValue dpo_pl_loss(const PolicyModel& policy, const PolicyModel& ref, const PreferenceDatum& d, double beta) {
  require_trainable(policy);
  require_ranked(d);
  const std::vector<double> lp = policy.log_probs(d.query);
  const std::vector<double> s = log_ratios(lp, ref.log_probs(d.query), d);
  const std::size_t K = d.ranking.size();
  std::vector<double> scaled(K);
  for (std::size_t k = 0; k < K; ++k) scaled[k] = beta * s[d.ranking[k]];

  LossValue out;
  out.query = d.query;
  std::vector<double> sens(K, 0.0);  // indexed by slot
  for (std::size_t k = 0; k < K; ++k) {
    // Stage k: -(βs_τ(k) - log Σ_{j≥k} exp(βs_τ(j))).
    const double top = *std::max_element(scaled.begin() + static_cast<std::ptrdiff_t>(k), scaled.end());
    double sum = 0.0;
    for (std::size_t j = k; j < K; ++j) sum += std::exp(scaled[j] - top);
    const double lse = top + std::log(sum);
    out.value += lse - scaled[k];
    sens[d.ranking[k]] -= beta;
    for (std::size_t j = k; j < K; ++j) sens[d.ranking[j]] += beta * std::exp(scaled[j] - lse);
  }
  out.value = std::max(out.value, 0.0);
  out.grad_row = chain_to_logits(lp, d.responses, sens);
  return out;
}

LossValue rrhf_loss(const PolicyModel& policy, const PreferenceDatum& d, double alpha_sft) {
  require_ranked(d);
  require_rewards(d);
  const std::vector<double> lp = policy.log_probs(d.query);
  const std::size_t K = d.responses.size();
  // Responses are atomic, so the length-normalized score is the plain log-probability.
  std::vector<double> p(K);
  for (std::size_t j = 0; j < K; ++j) p[j] = lp[d.responses[j]];

  LossValue out;
  out.query = d.query;
  std::vector<double> sens(K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      if (!(d.rewards[i] < d.rewards[j])) continue;
      const double margin = p[i] - p[j];
      if (margin > 0.0) {
        out.value += margin;
        sens[i] += 1.0;
        sens[j] -= 1.0;
      }
    }
  }
  const std::size_t best = d.ranking.front();
  out.value += alpha_sft * -p[best];
  sens[best] -= alpha_sft;
  out.grad_row = chain_to_logits(lp, d.responses, sens);
  return out;
}

LossValue lire_loss(const PolicyModel& policy, const PreferenceDatum& d, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("lire_loss: temperature must be positive");
  require_rewards(d);
  const std::vector<double> lp = policy.log_probs(d.query);
  const std::size_t K = d.responses.size();
  std::vector<double> a(K);
  for (std::size_t j = 0; j < K; ++j) a[j] = lp[d.responses[j]] / temperature;
  const double top = *std::max_element(a.begin(), a.end());
  double sum = 0.0;
  for (double v : a) sum += std::exp(v - top);
  std::vector<double> weights(K);
  double mean_reward = 0.0;
  for (std::size_t j = 0; j < K; ++j) {
    weights[j] = std::exp(a[j] - top) / sum;
    mean_reward += weights[j] * d.rewards[j];
  }
  LossValue out;
  out.query = d.query;
  out.value = -mean_reward;
  std::vector<double> sens(K);
  for (std::size_t j = 0; j < K; ++j) sens[j] = -weights[j] * (d.rewards[j] - mean_reward) / temperature;
  out.grad_row = chain_to_logits(lp, d.responses, sens);
  return out;
}

LossValue sft_loss(const PolicyModel& policy, const PreferenceDatum& d) {
  require_ranked(d);
  const std::vector<double> lp = policy.log_probs(d.query);
  const std::size_t best = d.ranking.front();
  LossValue out;
  out.query = d.query;
  out.value = -lp[d.responses[best]];
  std::vector<double> sens(d.responses.size(), 0.0);
  sens[best] = -1.0;
  out.grad_row = chain_to_logits(lp, d.responses, sens);
  return out;
}

LossValue evaluate_loss(LossKind kind, const LossParams& params, const PolicyModel& policy,
                        const PolicyModel& ref, const PreferenceDatum& d) {
  switch (kind) {
    case LossKind::kDpoPair: return dpo_pair_loss(policy, ref, d, params.beta);
    case LossKind::kDpoPl: return dpo_pl_loss(policy, ref, d, params.beta);
    case LossKind::kRrhf: return rrhf_loss(policy, d, params.alpha_sft);
    case LossKind::kLire: return lire_loss(policy, d, params.temperature);
    case LossKind::kSft: return sft_loss(policy, d);
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace dora
