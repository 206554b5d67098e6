#pragma once

#include <cmath>
#include <vector>

#include "dora/losses.hpp"
#include "dora/policy.hpp"
#include "dora/world.hpp"

namespace dora::test {

inline Table rows_table(const std::vector<std::vector<double>>& rows) {
  Table t(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) t(r, c) = rows[r][c];
  }
  return t;
}

// Single-query policy with the given logits.
inline PolicyModel row_policy(const std::vector<double>& logits) { return PolicyModel(rows_table({logits})); }

// Datum on query `x` ranked by `rewards` (best first); every slot marked as a target draw.
inline PreferenceDatum make_datum(std::size_t x, std::vector<std::size_t> responses, std::vector<double> rewards) {
  PreferenceDatum d;
  d.query = x;
  d.responses = std::move(responses);
  d.source_labels.assign(d.responses.size(), 1);
  d.rewards = std::move(rewards);
  d.ranking = rank_by_rewards(d.rewards);
  return d;
}

inline double kl_rows(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

}  // namespace dora::test
