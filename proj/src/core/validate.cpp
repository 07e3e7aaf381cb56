#include "ehrgen/core/validate.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace ehrgen {
namespace {

std::string idx(const char* name, std::size_t i) { return std::string(name) + "[" + std::to_string(i) + "]"; }

}  // namespace

std::vector<Violation> validate_patient(const PatientRecord& p, const CohortSchema& schema) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string msg) { out.push_back({p.patient_id, std::move(field), std::move(msg)}); };

  if (p.patient_id.empty()) add("patient_id", "empty patient_id");
  const auto& cov = schema.covariates();
  if (!std::isfinite(p.covariates.age) || p.covariates.age < cov.age_min || p.covariates.age > cov.age_max) {
    add("covariates.age", "age outside [" + std::to_string(cov.age_min) + ", " + std::to_string(cov.age_max) + "]");
  }
  if (!schema.gender_index(p.covariates.gender)) add("covariates.gender", "undeclared gender '" + p.covariates.gender + "'");
  if (p.visits.empty()) add("visits", "patient has no visits");

  for (std::size_t vi = 0; vi < p.visits.size(); ++vi) {
    const Visit& v = p.visits[vi];
    const std::string vpath = idx("visits", vi);
    if (v.labels.phenotypes.size() != schema.label_width()) {
      add(vpath + ".labels.phenotypes", "width " + std::to_string(v.labels.phenotypes.size()) + " != schema width " +
                                            std::to_string(schema.label_width()));
    }
    for (std::size_t ei = 0; ei < v.events.size(); ++ei) {
      if (!schema.code_index(v.events[ei].code)) {
        add(vpath + "." + idx("events", ei), "code '" + v.events[ei].code + "' not in code universe");
      }
    }
    double prev_t = -1.0;
    for (std::size_t ti = 0; ti < v.series.points.size(); ++ti) {
      const TimePoint& pt = v.series.points[ti];
      const std::string ppath = vpath + "." + idx("series", ti);
      if (!std::isfinite(pt.t) || pt.t < 0.0) {
        add(ppath + ".t", "timestamp must be finite and non-negative");
      } else if (pt.t <= prev_t) {
        add(ppath + ".t", pt.t == prev_t ? "repeated timestamp (group observations into one point)"
                                         : "timestamp decreases within visit");
      }
      if (std::isfinite(pt.t)) prev_t = std::max(prev_t, pt.t);
      if (pt.observations.empty()) add(ppath + ".obs", "time point without observations");
      std::unordered_set<std::string> seen;
      for (std::size_t oi = 0; oi < pt.observations.size(); ++oi) {
        const Observation& o = pt.observations[oi];
        const std::string opath = ppath + "." + idx("obs", oi);
        auto var = schema.variable_index(o.variable);
        if (!var) {
          add(opath + ".var", "unknown variable '" + o.variable + "'");
          continue;
        }
        if (!seen.insert(o.variable).second) add(opath + ".var", "variable '" + o.variable + "' observed twice at one time");
        const VariableSpec& spec = schema.variables()[*var];
        if (spec.kind == VariableKind::numeric) {
          if (!std::holds_alternative<double>(o.value)) {
            add(opath + ".val", "numeric variable '" + o.variable + "' has a categorical value");
          } else if (!std::isfinite(std::get<double>(o.value))) {
            add(opath + ".val", "non-finite value");
          }
        } else if (!std::holds_alternative<std::string>(o.value)) {
          add(opath + ".val", "categorical variable '" + o.variable + "' has a numeric value");
        } else if (!schema.category_index(*var, std::get<std::string>(o.value))) {
          add(opath + ".val", "undeclared category '" + std::get<std::string>(o.value) + "'");
        }
      }
    }
  }
  return out;
}

std::vector<Violation> validate_cohort(const Cohort& cohort) {
  std::vector<Violation> out;
  std::unordered_set<std::string> ids;
  for (const auto& p : cohort.patients) {
    auto v = validate_patient(p, cohort.schema);
    out.insert(out.end(), v.begin(), v.end());
    if (!ids.insert(p.patient_id).second) out.push_back({p.patient_id, "patient_id", "duplicate patient_id"});
  }
  if (!cohort.splits.empty() && cohort.splits.size() != cohort.patients.size()) {
    out.push_back({"", "splits", "split tags do not match patient count"});
  }
  return out;
}

}  // namespace ehrgen
