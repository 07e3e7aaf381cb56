#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/tok/bin_spec.hpp"

namespace ehrgen::tok {

using TokenId = std::uint32_t;

inline constexpr int kVocabularyFormatVersion = 1;

// Every token belongs to exactly one class; the sequence grammar is LL(1)
// over these classes.
enum class TokenClass : std::uint8_t {
  pad,
  bos,          // <s>
  eos,          // </s>
  end_covars,   // </covars>
  end_labels,   // </labels>
  end_ts,       // </ts>
  end_visit,    // </visit>
  age,          // <AGE_b>
  gender,       // <GENDER_g>
  label,        // <MORTALITY>, <PHENO_i>
  time_delta,   // <DT_b>
  code,         // <CODE_c>
  value_bin,    // <VAR_b>
  category,     // <VAR=level>
  number_open,  // <VAR>    digit-text mode only
  number_close, // </VAR>   digit-text mode only
  digit,        // <#0> ... <#9>, <#.>, <#->
};

const char* to_string(TokenClass cls);

// Payload of a token: `a`/`b` depend on the class.
//   age, time_delta: a = bin          gender: a = gender index
//   label: a = slot (0 mortality, 1 + i phenotype i)
//   code: a = code index              value_bin: a = variable, b = bin
//   category: a = variable, b = level number_open/close: a = variable
//   digit: a = character
struct TokenInfo {
  TokenClass cls = TokenClass::pad;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
};

struct VocabularyConfig {
  std::size_t value_bins = 10;
  std::size_t time_delta_bins = 10;
  std::size_t age_bins = 10;
  std::map<std::string, std::size_t> value_bins_override;  // per numeric variable
  bool digit_text = false;  // add tokens for the digit-text ablation mode

  bool operator==(const VocabularyConfig&) const = default;
};

inline constexpr std::string_view kDigitChars = "0123456789.-";

// Frozen token table. Ids are contiguous from 0 and <PAD> is 0. There are no
// mutating operations after construction.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;

  // value_bins holds one entry per schema variable (empty BinSpec for
  // categorical variables).
  Vocabulary(CohortSchema schema, VocabularyConfig config, BinSpec age_bins, BinSpec time_delta_bins,
             std::vector<BinSpec> value_bins);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const TokenInfo& info(TokenId id) const { return infos_.at(id); }
  TokenClass token_class(TokenId id) const { return infos_.at(id).cls; }
  std::optional<TokenId> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  TokenId bos() const noexcept { return 1; }
  TokenId eos() const noexcept { return 2; }
  TokenId end_covars() const noexcept { return 3; }
  TokenId end_labels() const noexcept { return 4; }
  TokenId end_ts() const noexcept { return 5; }
  TokenId end_visit() const noexcept { return 6; }
  TokenId age_token(std::size_t bin) const;
  TokenId gender_token(std::size_t gender) const;
  TokenId label_token(std::size_t slot) const;
  TokenId time_delta_token(std::size_t bin) const;
  TokenId code_token(std::size_t code) const;
  TokenId value_token(std::size_t variable, std::size_t bin) const;
  TokenId category_token(std::size_t variable, std::size_t level) const;
  TokenId number_open_token(std::size_t variable) const;
  TokenId number_close_token(std::size_t variable) const;
  TokenId digit_token(char c) const;

  const CohortSchema& schema() const noexcept { return schema_; }
  const VocabularyConfig& config() const noexcept { return config_; }
  const BinSpec& age_bins() const noexcept { return age_bins_; }
  const BinSpec& time_delta_bins() const noexcept { return time_delta_bins_; }
  const BinSpec& value_bins(std::size_t variable) const { return value_bins_.at(variable); }
  const std::vector<BinSpec>& all_value_bins() const noexcept { return value_bins_; }
  bool supports_digit_text() const noexcept { return config_.digit_text; }

  // Count of tokens per class, for reporting.
  std::map<std::string, std::size_t> class_counts() const;

 private:
  TokenId add(std::string token, TokenInfo info);

  CohortSchema schema_;
  VocabularyConfig config_;
  BinSpec age_bins_;
  BinSpec time_delta_bins_;
  std::vector<BinSpec> value_bins_;

  std::vector<std::string> tokens_;
  std::vector<TokenInfo> infos_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId age_base_ = 0, gender_base_ = 0, label_base_ = 0, delta_base_ = 0, code_base_ = 0, digit_base_ = 0;
  std::vector<TokenId> variable_base_;  // first value/category token per variable
  std::vector<TokenId> number_open_;
};

// Fits equal-width bins on the training cohort: one BinSpec per numeric
// variable over its observed values, one for the time deltas between
// consecutive measurement times (first delta from 0), one for age.
// Throws Error when `train` is empty or a numeric variable (or the time
// deltas) has no observations.
Vocabulary build_vocabulary(const Cohort& train, const VocabularyConfig& config = {});

nlohmann::json vocabulary_to_json(const Vocabulary& vocab);
// Throws VersionError on an unknown format_version and Error ("corrupt
// vocabulary") when the stored table disagrees with the rebuilt one.
Vocabulary vocabulary_from_json(const nlohmann::json& j);

void save_vocabulary(const std::string& path, const Vocabulary& vocab, const nlohmann::json& provenance);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace ehrgen::tok
