#include "ehrgen/metrics/ts_embedding.hpp"

#include <algorithm>
#include <cmath>

#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

namespace {

// Raw statistics with NaN marking an unobserved variable.
Matrix raw_stats(const Cohort& cohort, const CohortSchema& schema) {
  const std::size_t nv = schema.variables().size();
  Matrix out(cohort.size(), 5 * nv, std::nan(""));
  std::vector<std::vector<double>> values(nv);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (auto& v : values) v.clear();
    const auto& p = cohort.patients[i];
    if (!p.visits.empty()) {
      for (const auto& point : p.visits.front().series.points) {
        if (point.t > kEmbeddingWindowHours) continue;
        for (const auto& o : point.observations) {
          const auto v = schema.variable_index(o.variable);
          if (!v) throw PreconditionError("embedding: unknown variable " + o.variable);
          values[*v].push_back(observation_value(schema, *v, o.value));
        }
      }
    }
    double* row = out.row(i);
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& xs = values[v];
      row[4 * nv + v] = xs.empty() ? 0.0 : 1.0;
      if (xs.empty()) continue;
      double sum = 0;
      for (double x : xs) sum += x;
      const double mean = sum / static_cast<double>(xs.size());
      double ss = 0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      row[4 * v] = *std::min_element(xs.begin(), xs.end());
      row[4 * v + 1] = *std::max_element(xs.begin(), xs.end());
      row[4 * v + 2] = mean;
      row[4 * v + 3] = std::sqrt(ss / static_cast<double>(xs.size()));
    }
  }
  return out;
}

}  // namespace

double observation_value(const CohortSchema& schema, std::size_t var, const ObservedValue& value) {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  const auto idx = schema.category_index(var, std::get<std::string>(value));
  if (!idx) throw PreconditionError("embedding: unknown category " + std::get<std::string>(value));
  return static_cast<double>(*idx);
}

TSEmbedder::TSEmbedder(const Cohort& reference)
    : schema_(reference.schema), variables_(reference.schema.variables().size()) {
  const Matrix raw = raw_stats(reference, schema_);
  imputation_.fill.assign(4 * variables_, 0.0);
  for (std::size_t c = 0; c < 4 * variables_; ++c) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < raw.rows; ++r) {
      if (!std::isnan(raw(r, c))) {
        sum += raw(r, c);
        ++n;
      }
    }
    if (n > 0) imputation_.fill[c] = sum / static_cast<double>(n);
  }
}

Matrix TSEmbedder::embed(const Cohort& cohort) const {
  if (!(cohort.schema == schema_)) throw PreconditionError("embedding: cohort schema differs from the reference");
  Matrix m = raw_stats(cohort, schema_);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < 4 * variables_; ++c) {
      if (std::isnan(m(r, c))) m(r, c) = imputation_.fill[c];
    }
  }
  return m;
}

std::vector<std::string> TSEmbedder::column_names() const {
  std::vector<std::string> names;
  static const char* stats[] = {"min", "max", "mean", "std"};
  for (const auto& v : schema_.variables()) {
    for (const char* s : stats) names.push_back(v.name + "_" + s);
  }
  for (const auto& v : schema_.variables()) names.push_back(v.name + "_present");
  return names;
}

Matrix ts_embed(const Cohort& cohort) {
  return TSEmbedder(cohort).embed(cohort);
}

}  // namespace ehrgen::metrics
