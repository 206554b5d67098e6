#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dora/common.hpp"
#include "dora/losses.hpp"

namespace dora {

enum class AggregatorKind { kErm, kDro, kReweight, kDora };

std::string_view to_string(AggregatorKind kind);
AggregatorKind parse_aggregator_kind(std::string_view name);

struct Aggregator {
  AggregatorKind kind = AggregatorKind::kDora;
  double lambda = 1.0;

  bool robust() const { return kind == AggregatorKind::kDro || kind == AggregatorKind::kDora; }
  bool calibrated() const { return kind == AggregatorKind::kReweight || kind == AggregatorKind::kDora; }
};

// Stable log Σ_i p_i exp(v_i) for a probability vector p. Entries with p_i = 0 are ignored.
double log_mean_exp(std::span<const double> p, std::span<const double> v);

// ERM: mean(u). REWEIGHT: mean(h̃u). DRO: λ log mean exp(u/λ). DORA: λ log mean exp(h̃u/λ).
double aggregate(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg);

// Per-sample coefficients of the aggregated gradient: ∇L = Σ_i coeff_i ∇u_i, coeff_i = ω_i·h̃_i
// (h̃_i dropped for ERM/DRO). ω sums to 1.
struct AggregateWeights {
  std::vector<double> omega;
  std::vector<double> coeff;
};
AggregateWeights aggregate_weights(std::span<const double> losses, std::span<const double> calib,
                                   const Aggregator& agg);

// Dense gradient of the aggregated objective from per-sample loss gradients.
Table aggregate_grad(const std::vector<LossValue>& losses, std::span<const double> calib,
                     const Aggregator& agg, std::size_t query_count);

// Solution of max_q Σ q_i u_i subject to KL(q || p) ≤ ρ.
struct WorstCaseSolution {
  std::vector<double> weights;  // q*
  double tilt = 0.0;            // η = 1/λ*; +inf on the degenerate max-support boundary
  double kl = 0.0;
  double value = 0.0;
  double normalizer = 1.0;  // Z = Σ p_i exp(η(u_i - max u)); the max shift keeps it finite
  bool boundary = false;    // ρ ≥ KL of the max-support solution, constraint inactive
};

// Exponential tilting q_i(η) ∝ p_i e^{η u_i} with bisection on η until KL(q(η)||p) = ρ.
WorstCaseSolution worst_case_oracle(std::span<const double> losses, std::span<const double> base_weights,
                                    double rho);

// KL(q(η) || p) for the tilted family; exposed for tests.
double tilted_kl(std::span<const double> losses, std::span<const double> base_weights, double eta);

// inf_{λ>0} λ log Σ p_i exp(u_i/λ) + λρ, by golden-section search over log λ.
double dual_risk(std::span<const double> losses, std::span<const double> base_weights, double rho);

// The dual objective at a fixed λ.
double dual_objective(std::span<const double> losses, std::span<const double> base_weights, double rho,
                      double lambda);

}  // namespace dora
