#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ehrgen/core/record.hpp"

namespace ehrgen {

inline constexpr int kCohortFormatVersion = 1;

// Line-delimited cohort files hold one JSON patient record per line. An
// optional first line {"format": "ehrgen-cohort", ...} carries the format
// version and provenance; it is skipped on ingest after a version check.

nlohmann::json record_to_json(const PatientRecord& patient);
// Parses one record; type errors become ParseError (line set by caller).
PatientRecord record_from_json(const nlohmann::json& j);

// Reads and validates a cohort file. Throws ParseError (with line number),
// SchemaError (first violation) or Error on duplicate patient ids.
Cohort ingest_cohort(const std::string& path, const CohortSchema& schema);
Cohort ingest_cohort(std::istream& in, const CohortSchema& schema);

// `provenance` (may be null) is written into the header line.
void write_cohort(const std::string& path, const Cohort& cohort, const nlohmann::json& provenance);
void write_cohort(std::ostream& out, const Cohort& cohort, const nlohmann::json& provenance);

// Canonical serialisation, used for content hashes.
std::string serialize_cohort(const Cohort& cohort);

}  // namespace ehrgen
