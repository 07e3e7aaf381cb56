#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/matrix.hpp"

namespace ehrgen::metrics {

inline constexpr std::size_t kMinCorrelationSupport = 30;

struct CorrelationMatrix {
  Matrix r;                           // 0 where undefined
  std::vector<std::vector<bool>> defined;
  std::vector<std::vector<std::size_t>> support;  // co-occurring pairs
};

// Pooled Pearson correlation between every pair of variables over the
// (patient, visit, time point) triples observing both. Pairs with fewer than
// min_support co-occurrences (or zero variance) are undefined; the diagonal
// is 1 and defined.
CorrelationMatrix temporal_correlation(const Cohort& cohort, std::size_t min_support = kMinCorrelationSupport);

struct MseCorr {
  double value = 0.0;
  std::size_t entries = 0;  // off-diagonal pairs defined in both (i < j)
};

// Mean squared difference over off-diagonal pairs defined in both.
MseCorr mse_corr(const CorrelationMatrix& real, const CorrelationMatrix& synth);

// Levels [-1,-0.5), [-0.5,-0.2), [-0.2,0.2), [0.2,0.5), [0.5,1].
std::size_t correlation_level(double r);

// confusion[real level][synthetic level] over the pairs counted by mse_corr.
using Confusion = std::array<std::array<std::size_t, 5>, 5>;
Confusion corr_confusion(const CorrelationMatrix& real, const CorrelationMatrix& synth);
double diagonal_fraction(const Confusion& c);

// M[a][b] = points observing both a and b / points observing a (row 0 when a
// never occurs).
Matrix co_occurrence(const Cohort& cohort);
double frobenius_distance(const Matrix& a, const Matrix& b);

}  // namespace ehrgen::metrics
