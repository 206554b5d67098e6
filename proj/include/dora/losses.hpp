#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dora/policy.hpp"
#include "dora/world.hpp"

namespace dora {

enum class LossKind { kDpoPair, kDpoPl, kRrhf, kLire, kSft };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossParams {
  double beta = 0.1;         // DPO temperature
  double alpha_sft = 1.0;    // RRHF SFT mixing weight
  double temperature = 2.0;  // LIRE softmax temperature

  // Published per-task defaults.
  static LossParams dialogue() { return {0.1, 1.0, 2.0}; }
  static LossParams summarization() { return {0.5, 0.5, 1.0}; }

  void validate() const;
};

// A loss value and its gradient with respect to the policy logits. Each loss touches only
// the row of its datum's query, so the gradient is stored as that single row.
struct LossValue {
  double value = 0.0;
  std::size_t query = 0;
  std::vector<double> grad_row;

  Table dense_gradient(std::size_t query_count) const;
};

struct RewardConfig {
  double scale = 1.0;
  double offset = 0.0;
  double floor = -27.631021115928547;  // ln 1e-12
};

// scale · log Q_0(y|x) + offset; zero-density responses return the floor.
double reward_oracle(const World& world, std::size_t x, std::size_t y, const RewardConfig& config = {});
RewardFn make_reward_fn(const World& world, const RewardConfig& config = {});

LossValue dpo_pair_loss(const PolicyModel& policy, const PolicyModel& ref, const PreferenceDatum& d, double beta);
LossValue dpo_pl_loss(const PolicyModel& policy, const PolicyModel& ref, const PreferenceDatum& d, double beta);
LossValue rrhf_loss(const PolicyModel& policy, const PreferenceDatum& d, double alpha_sft);
LossValue lire_loss(const PolicyModel& policy, const PreferenceDatum& d, double temperature);
LossValue sft_loss(const PolicyModel& policy, const PreferenceDatum& d);

LossValue evaluate_loss(LossKind kind, const LossParams& params, const PolicyModel& policy,
                        const PolicyModel& ref, const PreferenceDatum& d);

}  // namespace dora
