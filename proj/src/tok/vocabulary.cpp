#include "ehrgen/tok/vocabulary.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ehrgen/util/error.hpp"

namespace ehrgen::tok {

using nlohmann::json;

const char* to_string(TokenClass cls) {
  switch (cls) {
    case TokenClass::pad: return "<PAD>";
    case TokenClass::bos: return "<s>";
    case TokenClass::eos: return "</s>";
    case TokenClass::end_covars: return "</covars>";
    case TokenClass::end_labels: return "</labels>";
    case TokenClass::end_ts: return "</ts>";
    case TokenClass::end_visit: return "</visit>";
    case TokenClass::age: return "age";
    case TokenClass::gender: return "gender";
    case TokenClass::label: return "label";
    case TokenClass::time_delta: return "time-delta";
    case TokenClass::code: return "code";
    case TokenClass::value_bin: return "value-bin";
    case TokenClass::category: return "category";
    case TokenClass::number_open: return "number-open";
    case TokenClass::number_close: return "number-close";
    case TokenClass::digit: return "digit";
  }
  return "?";
}

Vocabulary::Vocabulary(CohortSchema schema, VocabularyConfig config, BinSpec age_bins, BinSpec time_delta_bins,
                       std::vector<BinSpec> value_bins)
    : schema_(std::move(schema)),
      config_(std::move(config)),
      age_bins_(std::move(age_bins)),
      time_delta_bins_(std::move(time_delta_bins)),
      value_bins_(std::move(value_bins)) {
  const auto& vars = schema_.variables();
  if (value_bins_.size() != vars.size()) throw Error("vocabulary: one bin spec per variable required");
  check_bin_spec(age_bins_);
  check_bin_spec(time_delta_bins_);

  add("<PAD>", {TokenClass::pad});
  add("<s>", {TokenClass::bos});
  add("</s>", {TokenClass::eos});
  add("</covars>", {TokenClass::end_covars});
  add("</labels>", {TokenClass::end_labels});
  add("</ts>", {TokenClass::end_ts});
  add("</visit>", {TokenClass::end_visit});

  age_base_ = static_cast<TokenId>(size());
  for (std::uint32_t b = 0; b < age_bins_.bins(); ++b) add("<AGE_" + std::to_string(b) + ">", {TokenClass::age, b});
  gender_base_ = static_cast<TokenId>(size());
  const auto& genders = schema_.covariates().genders;
  for (std::uint32_t g = 0; g < genders.size(); ++g) add("<GENDER_" + genders[g] + ">", {TokenClass::gender, g});
  label_base_ = static_cast<TokenId>(size());
  add("<MORTALITY>", {TokenClass::label, 0});
  for (std::uint32_t i = 0; i < schema_.label_width(); ++i) {
    add("<PHENO_" + std::to_string(i) + ">", {TokenClass::label, i + 1});
  }
  delta_base_ = static_cast<TokenId>(size());
  for (std::uint32_t b = 0; b < time_delta_bins_.bins(); ++b) {
    add("<DT_" + std::to_string(b) + ">", {TokenClass::time_delta, b});
  }
  code_base_ = static_cast<TokenId>(size());
  for (std::uint32_t c = 0; c < schema_.codes().size(); ++c) add("<CODE_" + schema_.codes()[c] + ">", {TokenClass::code, c});

  variable_base_.resize(vars.size());
  number_open_.assign(vars.size(), 0);
  for (std::uint32_t v = 0; v < vars.size(); ++v) {
    variable_base_[v] = static_cast<TokenId>(size());
    if (vars[v].kind == VariableKind::numeric) {
      check_bin_spec(value_bins_[v]);
      for (std::uint32_t b = 0; b < value_bins_[v].bins(); ++b) {
        add("<" + vars[v].name + "_" + std::to_string(b) + ">", {TokenClass::value_bin, v, b});
      }
      if (config_.digit_text) {
        number_open_[v] = add("<" + vars[v].name + ">", {TokenClass::number_open, v});
        add("</" + vars[v].name + ">", {TokenClass::number_close, v});
      }
    } else {
      if (!value_bins_[v].edges.empty()) throw Error("vocabulary: categorical variable with bins");
      for (std::uint32_t c = 0; c < vars[v].categories.size(); ++c) {
        add("<" + vars[v].name + "=" + vars[v].categories[c] + ">", {TokenClass::category, v, c});
      }
    }
  }
  digit_base_ = static_cast<TokenId>(size());
  if (config_.digit_text) {
    for (char c : kDigitChars) add(std::string("<#") + c + ">", {TokenClass::digit, static_cast<std::uint32_t>(c)});
  }
}

TokenId Vocabulary::add(std::string token, TokenInfo info) {
  const auto id = static_cast<TokenId>(tokens_.size());
  if (!index_.emplace(token, id).second) throw Error("vocabulary: token '" + token + "' is not unique");
  tokens_.push_back(std::move(token));
  infos_.push_back(info);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::age_token(std::size_t bin) const {
  if (bin >= age_bins_.bins()) throw Error("age bin out of range");
  return age_base_ + static_cast<TokenId>(bin);
}
TokenId Vocabulary::gender_token(std::size_t g) const {
  if (g >= schema_.covariates().genders.size()) throw Error("gender out of range");
  return gender_base_ + static_cast<TokenId>(g);
}
TokenId Vocabulary::label_token(std::size_t slot) const {
  if (slot > schema_.label_width()) throw Error("label slot out of range");
  return label_base_ + static_cast<TokenId>(slot);
}
TokenId Vocabulary::time_delta_token(std::size_t bin) const {
  if (bin >= time_delta_bins_.bins()) throw Error("time-delta bin out of range");
  return delta_base_ + static_cast<TokenId>(bin);
}
TokenId Vocabulary::code_token(std::size_t code) const {
  if (code >= schema_.codes().size()) throw Error("code out of range");
  return code_base_ + static_cast<TokenId>(code);
}
TokenId Vocabulary::value_token(std::size_t variable, std::size_t bin) const {
  if (schema_.variables().at(variable).kind != VariableKind::numeric || bin >= value_bins_[variable].bins()) {
    throw Error("value token out of range");
  }
  return variable_base_[variable] + static_cast<TokenId>(bin);
}
TokenId Vocabulary::category_token(std::size_t variable, std::size_t level) const {
  const auto& v = schema_.variables().at(variable);
  if (v.kind != VariableKind::categorical || level >= v.categories.size()) throw Error("category token out of range");
  return variable_base_[variable] + static_cast<TokenId>(level);
}
TokenId Vocabulary::number_open_token(std::size_t variable) const {
  if (!config_.digit_text || schema_.variables().at(variable).kind != VariableKind::numeric) {
    throw Error("vocabulary has no digit-text tokens for this variable");
  }
  return number_open_[variable];
}
TokenId Vocabulary::number_close_token(std::size_t variable) const { return number_open_token(variable) + 1; }
TokenId Vocabulary::digit_token(char c) const {
  const auto pos = kDigitChars.find(c);
  if (!config_.digit_text || pos == std::string_view::npos) throw Error("no digit token for character");
  return digit_base_ + static_cast<TokenId>(pos);
}

std::map<std::string, std::size_t> Vocabulary::class_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& info : infos_) {
    const TokenClass c = info.cls;
    const bool special = c == TokenClass::pad || c == TokenClass::bos || c == TokenClass::eos ||
                         c == TokenClass::end_covars || c == TokenClass::end_labels || c == TokenClass::end_ts ||
                         c == TokenClass::end_visit;
    ++out[special ? "special" : to_string(c)];
  }
  return out;
}

Vocabulary build_vocabulary(const Cohort& train, const VocabularyConfig& config) {
  if (train.patients.empty()) throw Error("build_vocabulary: training cohort is empty");
  const CohortSchema& schema = train.schema;
  const auto& vars = schema.variables();
  std::vector<std::vector<double>> values(vars.size());
  std::vector<double> deltas, ages;
  for (const auto& p : train.patients) {
    ages.push_back(p.covariates.age);
    for (const auto& v : p.visits) {
      double prev = 0.0;
      for (const auto& pt : v.series.points) {
        deltas.push_back(pt.t - prev);
        prev = pt.t;
        for (const auto& o : pt.observations) {
          if (auto idx = schema.variable_index(o.variable); idx && std::holds_alternative<double>(o.value)) {
            values[*idx].push_back(std::get<double>(o.value));
          }
        }
      }
    }
  }
  std::vector<BinSpec> value_bins(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    if (vars[v].kind != VariableKind::numeric) continue;
    auto it = config.value_bins_override.find(vars[v].name);
    const std::size_t count = it == config.value_bins_override.end() ? config.value_bins : it->second;
    value_bins[v] = fit_bins(vars[v].name, BinKind::numeric_value, values[v], count);
  }
  return Vocabulary(schema, config, fit_bins("AGE", BinKind::covariate, ages, config.age_bins),
                    fit_bins("DT", BinKind::time_delta, deltas, config.time_delta_bins), std::move(value_bins));
}

namespace {

json bins_to_json(const BinSpec& b) {
  return {{"variable", b.variable}, {"kind", to_string(b.kind)}, {"edges", b.edges}};
}

BinSpec bins_from_json(const json& j) {
  return {j.at("variable").get<std::string>(), bin_kind_from_string(j.at("kind").get<std::string>()),
          j.at("edges").get<std::vector<double>>()};
}

}  // namespace

json vocabulary_to_json(const Vocabulary& vocab) {
  const auto& cfg = vocab.config();
  json value_bins = json::array();
  for (const auto& b : vocab.all_value_bins()) value_bins.push_back(b.edges.empty() ? json(nullptr) : bins_to_json(b));
  return {{"format", "ehrgen-vocabulary"},
          {"format_version", kVocabularyFormatVersion},
          {"config",
           {{"value_bins", cfg.value_bins},
            {"time_delta_bins", cfg.time_delta_bins},
            {"age_bins", cfg.age_bins},
            {"value_bins_override", cfg.value_bins_override},
            {"digit_text", cfg.digit_text}}},
          {"schema", schema_to_json(vocab.schema())},
          {"bins", {{"age", bins_to_json(vocab.age_bins())},
                    {"time_delta", bins_to_json(vocab.time_delta_bins())},
                    {"values", std::move(value_bins)}}},
          {"tokens", vocab.tokens()}};
}

Vocabulary vocabulary_from_json(const json& j) {
  try {
    if (j.at("format") != "ehrgen-vocabulary") throw Error("corrupt vocabulary: wrong format tag");
    const int version = j.at("format_version").get<int>();
    if (version != kVocabularyFormatVersion) {
      throw VersionError("vocabulary: unsupported format_version " + std::to_string(version));
    }
    VocabularyConfig cfg;
    const auto& jc = j.at("config");
    cfg.value_bins = jc.at("value_bins").get<std::size_t>();
    cfg.time_delta_bins = jc.at("time_delta_bins").get<std::size_t>();
    cfg.age_bins = jc.at("age_bins").get<std::size_t>();
    cfg.value_bins_override = jc.at("value_bins_override").get<std::map<std::string, std::size_t>>();
    cfg.digit_text = jc.at("digit_text").get<bool>();
    const auto& jb = j.at("bins");
    std::vector<BinSpec> value_bins;
    for (const auto& b : jb.at("values")) value_bins.push_back(b.is_null() ? BinSpec{} : bins_from_json(b));
    Vocabulary vocab(schema_from_json(j.at("schema")), cfg, bins_from_json(jb.at("age")),
                     bins_from_json(jb.at("time_delta")), std::move(value_bins));
    if (j.at("tokens").get<std::vector<std::string>>() != vocab.tokens()) {
      throw Error("corrupt vocabulary: token table does not match bins and schema");
    }
    return vocab;
  } catch (const json::exception& e) {
    throw Error(std::string("corrupt vocabulary: ") + e.what());
  }
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab, const json& provenance) {
  json j = vocabulary_to_json(vocab);
  if (!provenance.is_null()) j["provenance"] = provenance;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw Error("write failed: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("corrupt vocabulary " + path + ": " + e.what());
  }
  return vocabulary_from_json(j);
}

}  // namespace ehrgen::tok
