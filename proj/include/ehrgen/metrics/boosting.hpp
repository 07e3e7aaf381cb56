#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/metrics/matrix.hpp"

namespace ehrgen::metrics {

// Binary classifier used by the utility evaluation.
class BinaryClassifier {
 public:
  virtual ~BinaryClassifier() = default;
  // Throws PreconditionError when y holds a single class.
  virtual void fit(const Matrix& x, const std::vector<bool>& y) = 0;
  // Scores for the positive class; higher is more likely.
  virtual std::vector<double> predict(const Matrix& x) const = 0;
};

struct BoostingConfig {
  std::size_t rounds = 200;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  std::size_t max_bins = 32;      // candidate thresholds per feature (quantiles)
  std::size_t min_leaf = 5;       // minimum rows per leaf
  double l2 = 1.0;                // leaf-weight regularisation
  double subsample = 1.0;         // row fraction per round, drawn with `seed`
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Gradient-boosted regression trees on the logistic loss with second-order
// leaf values, split search over per-feature quantile thresholds, and
// depth-wise growth. Deterministic for a given config.
class GradientBoosting final : public BinaryClassifier {
 public:
  explicit GradientBoosting(BoostingConfig config = {});

  void fit(const Matrix& x, const std::vector<bool>& y) override;
  std::vector<double> predict(const Matrix& x) const override;
  std::size_t trees() const noexcept { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;  // x < threshold goes left
    std::size_t split_bin = 0;  // the same test on training bins
    int left = -1, right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  BoostingConfig config_;
  double base_ = 0.0;
  std::vector<Tree> trees_;
};

std::unique_ptr<BinaryClassifier> make_default_classifier(const BoostingConfig& config);

}  // namespace ehrgen::metrics
