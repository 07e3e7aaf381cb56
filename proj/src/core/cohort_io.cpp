#include "ehrgen/core/cohort_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ehrgen/core/validate.hpp"
#include "ehrgen/util/error.hpp"

namespace ehrgen {

using nlohmann::json;

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::synthetic: return "synthetic";
    case Split::unassigned: break;
  }
  return "unassigned";
}

Cohort Cohort::subset(Split tag) const {
  Cohort out;
  out.schema = schema;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    if (i < splits.size() && splits[i] == tag) {
      out.patients.push_back(patients[i]);
      out.splits.push_back(tag);
    }
  }
  return out;
}

json record_to_json(const PatientRecord& p) {
  json visits = json::array();
  for (const auto& v : p.visits) {
    json events = json::array();
    for (const auto& e : v.events) events.push_back(e.code);
    json series = json::array();
    for (const auto& pt : v.series.points) {
      json obs = json::array();
      for (const auto& o : pt.observations) {
        json val = std::holds_alternative<double>(o.value) ? json(std::get<double>(o.value))
                                                           : json(std::get<std::string>(o.value));
        obs.push_back({{"var", o.variable}, {"val", std::move(val)}});
      }
      series.push_back({{"t", pt.t}, {"obs", std::move(obs)}});
    }
    json phen = json::array();
    for (bool b : v.labels.phenotypes) phen.push_back(b);
    visits.push_back({{"labels", {{"mortality", v.labels.mortality}, {"phenotypes", std::move(phen)}}},
                      {"events", std::move(events)},
                      {"series", std::move(series)}});
  }
  return {{"patient_id", p.patient_id},
          {"covariates", {{"age", p.covariates.age}, {"gender", p.covariates.gender}}},
          {"visits", std::move(visits)}};
}

namespace {

double number(const json& j, const char* field) {
  if (!j.is_number()) throw ParseError(std::string("field '") + field + "' must be a number");
  return j.get<double>();
}

bool boolean(const json& j, const char* field) {
  if (!j.is_boolean()) throw ParseError(std::string("field '") + field + "' must be true/false");
  return j.get<bool>();
}

const std::string& text(const json& j, const char* field) {
  if (!j.is_string()) throw ParseError(std::string("field '") + field + "' must be a string");
  return j.get_ref<const std::string&>();
}

const json& member(const json& j, const char* field) {
  if (!j.is_object()) throw ParseError(std::string("expected an object holding '") + field + "'");
  auto it = j.find(field);
  if (it == j.end()) throw ParseError(std::string("missing field '") + field + "'");
  return *it;
}

const json& array(const json& j, const char* field) {
  const json& a = member(j, field);
  if (!a.is_array()) throw ParseError(std::string("field '") + field + "' must be an array");
  return a;
}

}  // namespace

PatientRecord record_from_json(const json& j) {
  PatientRecord p;
  p.patient_id = text(member(j, "patient_id"), "patient_id");
  const json& cov = member(j, "covariates");
  p.covariates.age = number(member(cov, "age"), "age");
  p.covariates.gender = text(member(cov, "gender"), "gender");
  for (const json& jv : array(j, "visits")) {
    Visit v;
    const json& labels = member(jv, "labels");
    v.labels.mortality = boolean(member(labels, "mortality"), "mortality");
    for (const json& b : array(labels, "phenotypes")) v.labels.phenotypes.push_back(boolean(b, "phenotypes"));
    for (const json& e : array(jv, "events")) v.events.push_back({text(e, "events")});
    for (const json& jp : array(jv, "series")) {
      TimePoint pt;
      pt.t = number(member(jp, "t"), "t");
      for (const json& jo : array(jp, "obs")) {
        Observation o;
        o.variable = text(member(jo, "var"), "var");
        const json& val = member(jo, "val");
        if (val.is_number()) {
          o.value = val.get<double>();
        } else if (val.is_string()) {
          o.value = val.get<std::string>();
        } else {
          throw ParseError("field 'val' must be a number or a string");
        }
        pt.observations.push_back(std::move(o));
      }
      v.series.points.push_back(std::move(pt));
    }
    p.visits.push_back(std::move(v));
  }
  return p;
}

Cohort ingest_cohort(std::istream& in, const CohortSchema& schema) {
  Cohort cohort;
  cohort.schema = schema;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    if (j.is_object() && j.contains("format")) {
      if (line_no != 1 || j["format"] != "ehrgen-cohort") throw ParseError("unexpected header record", line_no);
      if (j.value("format_version", -1) != kCohortFormatVersion) {
        throw VersionError("cohort: unsupported format_version " + j.value("format_version", json()).dump());
      }
      continue;
    }
    PatientRecord p;
    try {
      p = record_from_json(j);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (auto v = validate_patient(p, schema); !v.empty()) {
      throw SchemaError(v.front().patient_id, v.front().field, v.front().message);
    }
    if (!ids.insert(p.patient_id).second) {
      throw Error("line " + std::to_string(line_no) + ": duplicate patient_id '" + p.patient_id + "'");
    }
    cohort.patients.push_back(std::move(p));
    cohort.splits.push_back(Split::unassigned);
  }
  return cohort;
}

Cohort ingest_cohort(const std::string& path, const CohortSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cohort file " + path);
  return ingest_cohort(in, schema);
}

void write_cohort(std::ostream& out, const Cohort& cohort, const json& provenance) {
  json header = {{"format", "ehrgen-cohort"}, {"format_version", kCohortFormatVersion},
                 {"patients", cohort.patients.size()}};
  if (!provenance.is_null()) header["provenance"] = provenance;
  out << header.dump() << '\n';
  for (const auto& p : cohort.patients) out << record_to_json(p).dump() << '\n';
}

void write_cohort(const std::string& path, const Cohort& cohort, const json& provenance) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_cohort(out, cohort, provenance);
  if (!out) throw Error("write failed: " + path);
}

std::string serialize_cohort(const Cohort& cohort) {
  std::ostringstream out;
  out << schema_to_json(cohort.schema).dump() << '\n';
  for (const auto& p : cohort.patients) out << record_to_json(p).dump() << '\n';
  return out.str();
}

}  // namespace ehrgen
