#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/boosting.hpp"

namespace ehrgen::metrics {

struct UtilityConfig {
  std::vector<double> ratios{0.0, 0.1, 0.2, 0.5, 1.0};
  std::uint64_t seed = 0;
  BoostingConfig learner;
};

// One training setting evaluated on the test split. Features are the
// time-series embedding (imputation fitted on the real training split);
// labels come from each patient's first visit.
struct UtilityRow {
  std::string setting;  // "TRTR", "TSTR" or "ratio=<r>"
  std::optional<double> ratio;
  std::size_t real_rows = 0;
  std::size_t synthetic_rows = 0;
  std::optional<double> mortality;               // nullopt when a class is missing
  std::vector<std::optional<double>> phenotypes;
  std::optional<double> phenotype_macro;         // mean over defined phenotypes
};

struct UtilityResult {
  std::vector<UtilityRow> rows;
  nlohmann::json to_json() const;
};

// For each ratio r the training set is a seeded r-fraction subsample of the
// real training split plus every synthetic patient; TSTR trains on synthetic
// only and TRTR on the full real split. Throws PreconditionError when a
// training set would be empty or test is empty.
UtilityResult utility_eval(const Cohort& train, const Cohort& test, const Cohort& synth,
                           const UtilityConfig& config = {});

}  // namespace ehrgen::metrics
