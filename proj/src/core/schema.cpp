#include "ehrgen/core/schema.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ehrgen/util/error.hpp"

namespace ehrgen {
namespace {

void check_name(const std::string& what, const std::string& name) {
  if (name.empty()) throw Error("schema: empty " + what + " name");
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '>') {
      throw Error("schema: " + what + " name '" + name + "' contains whitespace or angle brackets");
    }
  }
}

}  // namespace

const char* to_string(VariableKind kind) {
  return kind == VariableKind::numeric ? "numeric" : "categorical";
}

CohortSchema::CohortSchema(SchemaDefinition def) : def_(std::move(def)) {
  if (def_.variables.empty()) throw Error("schema: variable registry is empty");
  if (def_.covariates.genders.empty()) throw Error("schema: gender label set is empty");
  if (!(std::isfinite(def_.covariates.age_min) && std::isfinite(def_.covariates.age_max)) ||
      def_.covariates.age_min < 0.0 || def_.covariates.age_min > def_.covariates.age_max) {
    throw Error("schema: invalid age range");
  }
  for (std::size_t i = 0; i < def_.codes.size(); ++i) {
    check_name("code", def_.codes[i]);
    if (!code_index_.emplace(def_.codes[i], i).second) {
      throw Error("schema: duplicate code '" + def_.codes[i] + "'");
    }
  }
  for (std::size_t i = 0; i < def_.variables.size(); ++i) {
    const auto& v = def_.variables[i];
    check_name("variable", v.name);
    if (code_index_.count(v.name)) throw Error("schema: name '" + v.name + "' is both a code and a variable");
    if (!variable_index_.emplace(v.name, i).second) throw Error("schema: duplicate variable '" + v.name + "'");
    if (v.kind == VariableKind::categorical) {
      if (v.categories.empty()) throw Error("schema: categorical variable '" + v.name + "' has no categories");
      std::set<std::string> seen;
      for (const auto& c : v.categories) {
        check_name("category", c);
        if (!seen.insert(c).second) throw Error("schema: duplicate category '" + c + "' in '" + v.name + "'");
      }
    } else if (!v.categories.empty()) {
      throw Error("schema: numeric variable '" + v.name + "' declares categories");
    }
  }
  std::set<std::string> genders;
  for (const auto& g : def_.covariates.genders) {
    check_name("gender", g);
    if (!genders.insert(g).second) throw Error("schema: duplicate gender '" + g + "'");
  }
}

std::optional<std::size_t> CohortSchema::code_index(const std::string& code) const {
  auto it = code_index_.find(code);
  if (it == code_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> CohortSchema::variable_index(const std::string& name) const {
  auto it = variable_index_.find(name);
  if (it == variable_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> CohortSchema::category_index(std::size_t variable, const std::string& category) const {
  const auto& cats = def_.variables.at(variable).categories;
  auto it = std::find(cats.begin(), cats.end(), category);
  if (it == cats.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cats.begin());
}

std::optional<std::size_t> CohortSchema::gender_index(const std::string& gender) const {
  const auto& g = def_.covariates.genders;
  auto it = std::find(g.begin(), g.end(), gender);
  if (it == g.end()) return std::nullopt;
  return static_cast<std::size_t>(it - g.begin());
}

bool CohortSchema::operator==(const CohortSchema& other) const {
  return schema_to_json(*this) == schema_to_json(other);
}

nlohmann::json schema_to_json(const CohortSchema& schema) {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : schema.variables()) {
    nlohmann::json jv = {{"name", v.name}, {"kind", to_string(v.kind)}};
    if (v.kind == VariableKind::categorical) jv["categories"] = v.categories;
    vars.push_back(std::move(jv));
  }
  return {
      {"format", "ehrgen-schema"},
      {"format_version", kSchemaFormatVersion},
      {"codes", schema.codes()},
      {"variables", std::move(vars)},
      {"covariates",
       {{"age", {{"min", schema.covariates().age_min}, {"max", schema.covariates().age_max}}},
        {"genders", schema.covariates().genders}}},
      {"label_width", schema.label_width()},
  };
}

CohortSchema schema_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kSchemaFormatVersion) {
      throw VersionError("schema: unsupported format_version " + std::to_string(version));
    }
    SchemaDefinition def;
    def.codes = j.at("codes").get<std::vector<std::string>>();
    for (const auto& jv : j.at("variables")) {
      VariableSpec v;
      v.name = jv.at("name").get<std::string>();
      const auto kind = jv.at("kind").get<std::string>();
      if (kind == "numeric") {
        v.kind = VariableKind::numeric;
      } else if (kind == "categorical") {
        v.kind = VariableKind::categorical;
        v.categories = jv.at("categories").get<std::vector<std::string>>();
      } else {
        throw ParseError("schema: unknown variable kind '" + kind + "'");
      }
      def.variables.push_back(std::move(v));
    }
    const auto& cov = j.at("covariates");
    def.covariates.age_min = cov.at("age").at("min").get<double>();
    def.covariates.age_max = cov.at("age").at("max").get<double>();
    def.covariates.genders = cov.at("genders").get<std::vector<std::string>>();
    def.label_width = j.at("label_width").get<std::size_t>();
    return CohortSchema(std::move(def));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
}

CohortSchema read_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return schema_from_json(j);
}

void write_schema(const std::string& path, const CohortSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << schema_to_json(schema).dump(2) << '\n';
}

}  // namespace ehrgen
