#pragma once

#include <span>
#include <vector>

namespace ehrgen::metrics {

struct Pearson {
  double r = 0.0;
  bool degenerate = false;  // a side had zero variance; r reported as 0
};

// Pearson correlation. Identical vectors give exactly 1 (even when constant);
// otherwise zero variance on either side gives r = 0 flagged degenerate.
// Throws PreconditionError on a size mismatch or fewer than 2 entries.
Pearson pearson(std::span<const double> x, std::span<const double> y);

// Area under the ROC curve as the Mann-Whitney rank statistic with midranks
// for ties. Throws PreconditionError unless both classes are present.
double auroc(std::span<const double> scores, const std::vector<bool>& positive);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC curve from (0, 0) to (1, 1), one point per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive);
double trapezoid_area(const std::vector<RocPoint>& curve);

// Wasserstein-1 between two empirical distributions: the integral of
// |F_a - F_b|. Throws PreconditionError when either sample is empty.
double wasserstein1(std::vector<double> a, std::vector<double> b);

}  // namespace ehrgen::metrics
