#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ehrgen {

inline constexpr int kSchemaFormatVersion = 1;

enum class VariableKind { numeric, categorical };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::numeric;
  std::vector<std::string> categories;  // categorical only, declaration order
};

struct CovariateRanges {
  double age_min = 0.0;
  double age_max = 120.0;
  std::vector<std::string> genders;
};

// Plain description of a schema, as read from disk or assembled in code.
struct SchemaDefinition {
  std::vector<std::string> codes;
  std::vector<VariableSpec> variables;
  CovariateRanges covariates;
  std::size_t label_width = 25;
};

// Validated, indexed cohort schema. Immutable after construction.
//
// Names (codes, variables, categories, genders) may not contain whitespace
// or angle brackets, because they end up inside space-separated token files.
class CohortSchema {
 public:
  CohortSchema() = default;
  explicit CohortSchema(SchemaDefinition def);

  const SchemaDefinition& definition() const noexcept { return def_; }
  const std::vector<std::string>& codes() const noexcept { return def_.codes; }
  const std::vector<VariableSpec>& variables() const noexcept { return def_.variables; }
  const CovariateRanges& covariates() const noexcept { return def_.covariates; }
  std::size_t label_width() const noexcept { return def_.label_width; }

  std::optional<std::size_t> code_index(const std::string& code) const;
  std::optional<std::size_t> variable_index(const std::string& name) const;
  std::optional<std::size_t> category_index(std::size_t variable, const std::string& category) const;
  std::optional<std::size_t> gender_index(const std::string& gender) const;

  bool operator==(const CohortSchema& other) const;

 private:
  SchemaDefinition def_;
  std::unordered_map<std::string, std::size_t> code_index_;
  std::unordered_map<std::string, std::size_t> variable_index_;
};

nlohmann::json schema_to_json(const CohortSchema& schema);
CohortSchema schema_from_json(const nlohmann::json& j);

CohortSchema read_schema(const std::string& path);
void write_schema(const std::string& path, const CohortSchema& schema);

const char* to_string(VariableKind kind);

}  // namespace ehrgen
