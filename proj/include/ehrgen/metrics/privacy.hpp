#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/matrix.hpp"

namespace ehrgen::metrics {

inline constexpr std::size_t kJsdGridPoints = 4096;

struct GaussianFit {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1) convention; 0 for a single value
};

GaussianFit fit_gaussian(const std::vector<double>& x);

struct Jsd {
  double value = 0.0;       // base-2, in [0, 1]
  bool degenerate = false;  // a fitted Gaussian had zero variance
};

// Jensen-Shannon divergence between two normals by trapezoidal integration
// on a 4096-point grid spanning both means +- 6 sigma. A zero-variance side
// is treated as a point mass: equal points give 0, otherwise 1; both cases
// are flagged.
Jsd gaussian_jsd(const GaussianFit& a, const GaussianFit& b);

struct AttackResult {
  std::string distance;  // "hamming" or "euclidean"
  double wasserstein = 0.0;
  Jsd jsd;
  double auroc = 0.5;
  GaussianFit member, non_member;
  nlohmann::json to_json() const;
};

// Distances to the nearest synthetic row, then the attack summary with
// training rows as members. Lower distance is scored as more likely member.
AttackResult distance_attack(const std::string& name, const std::vector<double>& member_distances,
                             const std::vector<double>& non_member_distances);

// Fixed-width binary code-presence vector per patient (union over visits).
Matrix code_presence(const Cohort& cohort);

std::vector<double> nearest_hamming(const Matrix& queries, const Matrix& reference);
std::vector<double> nearest_euclidean(const Matrix& queries, const Matrix& reference);

struct MiaResult {
  AttackResult codes;      // Hamming on code presence
  AttackResult embedding;  // Euclidean on standardized time-series embeddings
  nlohmann::json to_json() const;
};

// Embeddings use the imputation and standardization fitted on `train`.
// Throws PreconditionError when any cohort is empty.
MiaResult mia_privacy(const Cohort& train, const Cohort& test, const Cohort& synth);

}  // namespace ehrgen::metrics
