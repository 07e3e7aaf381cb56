#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ehrgen/core/schema.hpp"

namespace ehrgen {

// A numeric measurement or a categorical level.
using ObservedValue = std::variant<double, std::string>;

struct Observation {
  std::string variable;
  ObservedValue value;
  bool operator==(const Observation&) const = default;
};

// All observations taken at one time, in hours since the visit start.
struct TimePoint {
  double t = 0.0;
  std::vector<Observation> observations;
  bool operator==(const TimePoint&) const = default;
};

struct TimeSeries {
  std::vector<TimePoint> points;
  bool operator==(const TimeSeries&) const = default;
};

struct LabelSet {
  bool mortality = false;
  std::vector<bool> phenotypes;
  bool operator==(const LabelSet&) const = default;
};

struct CodeEvent {
  std::string code;
  bool operator==(const CodeEvent&) const = default;
};

struct Visit {
  LabelSet labels;
  std::vector<CodeEvent> events;
  TimeSeries series;
  bool operator==(const Visit&) const = default;
};

struct CovariateSet {
  double age = 0.0;
  std::string gender;
  bool operator==(const CovariateSet&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  CovariateSet covariates;
  std::vector<Visit> visits;
  bool operator==(const PatientRecord&) const = default;
};

enum class Split { unassigned, train, validation, test, synthetic };

const char* to_string(Split split);

// A schema plus its patients; `splits` is parallel to `patients`.
struct Cohort {
  CohortSchema schema;
  std::vector<PatientRecord> patients;
  std::vector<Split> splits;

  std::size_t size() const noexcept { return patients.size(); }
  // Patients carrying `tag`, in cohort order.
  Cohort subset(Split tag) const;
};

}  // namespace ehrgen
