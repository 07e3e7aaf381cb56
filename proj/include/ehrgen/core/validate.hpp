#pragma once

#include <string>
#include <vector>

#include "ehrgen/core/record.hpp"

namespace ehrgen {

struct Violation {
  std::string patient_id;
  std::string field;    // dotted path, e.g. "visits[0].series[3].obs[1].var"
  std::string message;
  bool operator==(const Violation&) const = default;
};

// Checks every record invariant against `schema`:
//  - at least one visit; age finite and inside the covariate range; gender declared
//  - label width equal to the schema's
//  - codes present in the code universe
//  - time points: finite non-negative timestamps, strictly increasing
//    (equal timestamps must be grouped into one point), at least one
//    observation each, no variable observed twice at one time
//  - variables declared; value kind matches; categories declared
std::vector<Violation> validate_patient(const PatientRecord& patient, const CohortSchema& schema);

// validate_patient over every patient, plus duplicate ids and split-tag length.
std::vector<Violation> validate_cohort(const Cohort& cohort);

}  // namespace ehrgen
