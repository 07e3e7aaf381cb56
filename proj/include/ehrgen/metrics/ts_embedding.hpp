#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/matrix.hpp"

namespace ehrgen::metrics {

inline constexpr double kEmbeddingWindowHours = 48.0;

// Observations of variable `var` as numbers: numeric values as-is,
// categorical levels as their index in the schema's category list.
double observation_value(const CohortSchema& schema, std::size_t var, const ObservedValue& value);

// Fill values for variables a patient never observed in the window: the
// per-statistic mean over the patients that did (0 when nobody did).
struct Imputation {
  std::vector<double> fill;  // 4 per variable: min, max, mean, std
};

// Per patient, over the points of the first visit with t <= 48 h: for each
// variable (min, max, mean, population std) at columns 4v..4v+3, then one
// presence flag per variable at column 4V + v.
class TSEmbedder {
 public:
  // Fits the imputation on `reference` (the real training cohort).
  explicit TSEmbedder(const Cohort& reference);

  Matrix embed(const Cohort& cohort) const;
  const Imputation& imputation() const noexcept { return imputation_; }
  std::size_t width() const noexcept { return 5 * variables_; }
  std::vector<std::string> column_names() const;

 private:
  CohortSchema schema_;
  std::size_t variables_ = 0;
  Imputation imputation_;
};

// Embedding of `cohort` with the imputation fitted on itself.
Matrix ts_embed(const Cohort& cohort);

}  // namespace ehrgen::metrics
