#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/metrics/matrix.hpp"

namespace ehrgen::metrics {

// Per-column z-scoring with statistics of a reference set. Constant columns
// are centred but not scaled.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& reference);
  Matrix apply(const Matrix& m) const;
};

double euclidean(const double* a, const double* b, std::size_t dim);

struct PRDC {
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
  nlohmann::json to_json() const;
};

// k-NN manifold metrics. A point lies inside a ball when its distance to
// the centre is strictly below the centre's k-th nearest-neighbour distance
// within its own set (self excluded). Inputs are used as given; standardize
// first. Throws PreconditionError when either set has <= k points, the
// widths differ, or every real point is identical.
PRDC prdc(const Matrix& real, const Matrix& fake, std::size_t k = 5);

// Distance from each row of `points` to its k-th nearest other row.
std::vector<double> kth_neighbour_distances(const Matrix& points, std::size_t k);

}  // namespace ehrgen::metrics
