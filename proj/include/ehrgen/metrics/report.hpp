#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/metrics/correlation.hpp"
#include "ehrgen/metrics/matrix.hpp"
#include "ehrgen/metrics/utility.hpp"

namespace ehrgen::metrics {

inline constexpr int kReportFormatVersion = 1;

struct EvaluationConfig {
  std::size_t n_top = 1000;
  std::size_t prdc_k = 5;
  std::size_t min_corr_support = kMinCorrelationSupport;
  bool utility = true;
  bool privacy = true;
  UtilityConfig utility_config;

  nlohmann::json to_json() const;
};

EvaluationConfig evaluation_config_from_json(const nlohmann::json& j);

// Matrices kept alongside the report for CSV export and plotting.
struct ReportTables {
  std::vector<std::string> variables;
  CorrelationMatrix real_corr, synth_corr;
  Confusion confusion{};
  Matrix real_cooccurrence, synth_cooccurrence;
};

struct EvaluationReport {
  nlohmann::json json;  // deterministic given inputs and config
  ReportTables tables;
};

// Runs fidelity, utility and privacy. `provenance` is copied into the
// report next to the cohort hashes and the evaluation config.
EvaluationReport evaluate(const Cohort& train, const Cohort& test, const Cohort& synth,
                          const EvaluationConfig& config = {}, const nlohmann::json& provenance = {});

// SHA-256 of the canonical cohort serialization.
std::string cohort_hash(const Cohort& cohort);

// Comma-separated tables with a header row and a leading label column.
std::string matrix_csv(const Matrix& m, const std::vector<std::string>& row_names,
                       const std::vector<std::string>& col_names);
std::string confusion_csv(const Confusion& c);

// Writes report.json plus correlation, confusion and co-occurrence CSVs into
// `dir`. Returns the files written (names relative to dir).
std::vector<std::string> write_report(const std::string& dir, const EvaluationReport& report);

// Binary PPM heatmap, `cell` pixels per entry. Values in [lo, hi] are mapped
// blue (lo) - white (mid) - red (hi); NaN renders grey.
void write_heatmap_ppm(const std::string& path, const Matrix& m, double lo, double hi, std::size_t cell = 24);

}  // namespace ehrgen::metrics
