#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dora/dro.hpp"
#include "dora/losses.hpp"

namespace dora {

// One random KL-DRO instance: losses, base distribution and budget.
struct DroInstance {
  std::vector<double> losses;
  std::vector<double> base;
  double rho = 0.0;
};

// N ∈ [1, max_n], u_i ∈ [-max_abs, max_abs], ρ ∈ [0, max_rho]. Base weights are uniform for a
// third of the instances and Dirichlet(1) otherwise; some instances get repeated losses.
DroInstance random_dro_instance(std::mt19937_64& rng, std::size_t max_n = 20, double max_abs = 20.0,
                                double max_rho = 3.0);

struct DualityRow {
  std::size_t id = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;       // |dual - primal|
  double relative = 0.0;  // gap / max(1, |primal|)
  double tilt_error = 0.0;  // max relative deviation of q* from p·exp(ηu)/Z on the support
  double kl_error = 0.0;    // |KL(q*||p) - ρ| when the constraint is active, else 0
  bool pass = false;
};

struct DualityReport {
  std::vector<DualityRow> rows;
  double max_relative = 0.0;
  double max_tilt_error = 0.0;
  double max_kl_error = 0.0;
  std::size_t failures = 0;
};

// Max relative deviation of the oracle's weights from the tilted form, plus |KL - ρ|.
std::pair<double, double> tilt_identity_error(const DroInstance& inst, const WorstCaseSolution& sol);

DualityReport check_duality(std::size_t instances, std::uint64_t seed, double tolerance = 1e-6,
                            double identity_tolerance = 1e-8);

std::string duality_csv(const DualityReport& report, const std::string& hash, std::uint64_t seed);

// Signature of an aggregate implementation; lets the verifier run against a substitute.
using AggregateFn = std::function<double(std::span<const double>, std::span<const double>, const Aggregator&)>;

struct LimitReport {
  double max_large_lambda_error = 0.0;  // |agg(λ=1e6) - mean(h̃u)|
  double max_small_lambda_error = 0.0;  // |agg(λ=1e-4) - max(h̃u)|
  std::size_t monotonicity_violations = 0;
  std::size_t batches = 0;
  bool pass = false;
};

// Random batches with pairwise gaps of h̃u ≥ 0.1; checks both λ limits and monotonicity over a
// 20-point log grid in λ.
LimitReport check_lse_limits(std::size_t batches, std::uint64_t seed, const AggregateFn& agg = {});

// A deliberately wrong aggregator for negative-control runs: drops the λ factor outside the log.
double broken_aggregate(std::span<const double> losses, std::span<const double> calib, const Aggregator& agg);

struct GradientCheck {
  std::string label;
  std::size_t draws = 0;
  double max_relative_error = 0.0;
  bool pass = false;
};

// Central finite differences (step 1e-5) against analytic gradients for every loss kind, and
// for each aggregator over a batch mixing loss kinds. Tolerance 1e-5 relative.
std::vector<GradientCheck> check_gradients(std::size_t draws, std::uint64_t seed, double tolerance = 1e-5);

// Relative error metric used by the gradient checks: ‖a - b‖∞ / max(‖a‖∞, ‖b‖∞, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-3);

}  // namespace dora
