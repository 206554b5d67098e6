#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dora/world.hpp"

namespace dora {

enum class FeatureEncoding {
  kAdditive,  // one-hot(x) ++ one-hot(y) ++ [1]
  kJoint,     // kAdditive ++ one-hot(x, y)
};

std::size_t feature_dimension(FeatureEncoding enc, std::size_t query_count, std::size_t response_count);

std::vector<double> featurize(std::size_t x, std::size_t y, std::size_t query_count,
                              std::size_t response_count,
                              FeatureEncoding enc = FeatureEncoding::kAdditive);

struct ClassifierConfig {
  double learning_rate = 1.0;
  std::size_t epochs = 4000;
  std::uint64_t seed = 0;
  double epsilon_clamp = 1e-4;
  FeatureEncoding encoding = FeatureEncoding::kAdditive;
};

// Per-slot logistic classifier c_j(y|x) = P(target | x, y in slot j).
struct ClassifierModel {
  std::size_t slot = 0;
  std::size_t query_count = 0;
  std::size_t response_count = 0;
  FeatureEncoding encoding = FeatureEncoding::kAdditive;
  std::vector<double> weights;
  double imbalance_ratio = 1.0;  // (# label 0) / (# label 1) in the slot's training data
  double epsilon_clamp = 1e-4;
  std::vector<double> loss_history;  // mean cross-entropy before each epoch, plus the final value

  double score(std::size_t x, std::size_t y) const;
  bool operator==(const ClassifierModel&) const = default;
};

ClassifierModel train_classifier(const Dataset& dataset, std::size_t slot, std::size_t query_count,
                                 std::size_t response_count, const ClassifierConfig& config = {});

// Sigmoid of the linear score, clamped to [ε, 1-ε].
double predict_proba(const ClassifierModel& model, std::size_t x, std::size_t y);

// γ_j · c / (1 - c): the classifier's estimate of P_golden(y|x) / Q_j(y|x).
double importance_weight(const ClassifierModel& model, std::size_t x, std::size_t y);

inline constexpr double kCalibrationFloor = 1e-6;

struct CalibrationRecord {
  std::size_t datum_index = 0;
  double h_tilde = 0.0;
  std::vector<double> per_slot_terms;  // stabilized terms before the final clamp

  bool operator==(const CalibrationRecord&) const = default;
};

// Stabilized slot term γ c / (m (1 - c) + 1/n).
double calibration_term(double confidence, double imbalance_ratio, double mixture_weight,
                        std::size_t n_slots);

// h̃ = clamp(mean_j t_j, ε_h, n - ε_h), with slot j scored at (x, y_j).
CalibrationRecord calibration_factor(const std::vector<ClassifierModel>& models,
                                     const MixtureSpec& spec, const PreferenceDatum& datum,
                                     std::size_t datum_index = 0);

std::vector<CalibrationRecord> precompute_calibration(const Dataset& dataset,
                                                      const std::vector<ClassifierModel>& models,
                                                      const MixtureSpec& spec);

std::vector<double> calibration_values(const std::vector<CalibrationRecord>& records);

}  // namespace dora
