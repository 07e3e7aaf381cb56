#pragma once

#include "ehrgen/core/record.hpp"

namespace ehrgen::testing {

// Two numeric variables, one categorical, three codes, width-3 labels.
inline CohortSchema small_schema() {
  SchemaDefinition d;
  d.codes = {"A1", "B2", "C3"};
  d.variables = {{"HR", VariableKind::numeric, {}},
                 {"LACT", VariableKind::numeric, {}},
                 {"GCS", VariableKind::categorical, {"severe", "moderate", "mild"}}};
  d.covariates = {18.0, 90.0, {"F", "M"}};
  d.label_width = 3;
  return CohortSchema(d);
}

inline PatientRecord small_patient(const std::string& id = "p0") {
  PatientRecord p;
  p.patient_id = id;
  p.covariates = {63.0, "F"};
  Visit v1;
  v1.labels = {true, {false, true, false}};
  v1.events = {{"B2"}, {"A1"}, {"B2"}};
  v1.series.points = {
      {0.0, {{"HR", 88.0}, {"LACT", 2.5}}},
      {1.5, {{"GCS", std::string("mild")}}},
      {7.25, {{"HR", 120.0}, {"GCS", std::string("severe")}}},
  };
  Visit v2;
  v2.labels = {false, {false, false, false}};
  v2.series.points = {{3.0, {{"LACT", 0.9}}}};
  p.visits = {v1, v2};
  return p;
}

inline Cohort small_cohort() {
  Cohort c;
  c.schema = small_schema();
  c.patients.push_back(small_patient("p0"));
  PatientRecord q = small_patient("p1");
  q.covariates = {25.0, "M"};
  q.visits[0].series.points[0].observations[0].value = 55.0;
  q.visits[1].series.points[0].t = 20.0;
  c.patients.push_back(q);
  PatientRecord r = small_patient("p2");
  r.covariates = {80.0, "F"};
  r.visits[0].series.points[2].observations[0].value = 165.0;
  r.visits[0].series.points[1].observations[0].value = std::string("moderate");
  c.patients.push_back(r);
  c.splits.assign(3, Split::unassigned);
  return c;
}

}  // namespace ehrgen::testing
