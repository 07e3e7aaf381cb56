#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ehrgen/core/record.hpp"
#include "ehrgen/tok/vocabulary.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen::tok {

// Sequence grammar, one patient:
//
//   <s> AGE GENDER </covars> visit+ </s>
//   visit   := LABEL* </labels> CODE* point* </ts> </visit>
//   point   := DT value+
//   value   := VALUE_BIN | CATEGORY | <VAR> DIGIT+ </VAR>
//
// Labels are emitted only when positive. Observations within a point follow
// the schema registry order; the first delta of a visit counts from 0.

enum class EncodeMode { binned, digit_text };

const char* to_string(EncodeMode mode);
EncodeMode encode_mode_from_string(const std::string& s);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::string patient_id;

  std::size_t size() const noexcept { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Throws Error when the patient uses a code, variable or category the
// vocabulary does not know, or digit_text is requested from a vocabulary
// built without digit tokens.
TokenSequence encode(const PatientRecord& patient, const Vocabulary& vocab, EncodeMode mode = EncodeMode::binned);

enum class ValueMode { midpoint, uniform_sample };

const char* to_string(ValueMode mode);
ValueMode value_mode_from_string(const std::string& s);

struct MalformedReport {
  std::size_t position = 0;  // index of the offending token; size() when the stream ended early
  std::string expected;      // token classes allowed at that position
  std::string found;         // offending token string, or "end of sequence"
  std::string message() const;
};

using DecodeResult = std::variant<PatientRecord, MalformedReport>;

// Incremental LL(1) parser over token classes. Each token is accepted or
// rejected with one lookahead; no backtracking. Values are drawn from their
// bins as tokens arrive (midpoint, or uniformly with the parser's own RNG).
class SequenceParser {
 public:
  SequenceParser(const Vocabulary& vocab, ValueMode mode = ValueMode::midpoint, std::uint64_t seed = 0);

  // Consumes one token. Returns false and records an error when the token is
  // not allowed; later calls then return false without consuming.
  bool feed(TokenId id);
  // True when id would be accepted at the current position.
  bool accepts(TokenId id) const;
  // Human-readable token classes allowed next.
  std::string expected() const;
  bool complete() const noexcept { return state_ == State::done; }
  bool failed() const noexcept { return error_.has_value(); }
  std::size_t position() const noexcept { return position_; }
  // Number of fully closed visits so far.
  std::size_t visits() const noexcept { return record_.visits.size() - (in_visit() ? 1 : 0); }

  // The decoded record, or the first error (an incomplete stream is reported
  // at position() with found = "end of sequence").
  DecodeResult finish(std::string patient_id = {}) const;

 private:
  enum class State {
    bos, age, gender, end_covars, labels, codes, point_value, point, number, end_visit, after_visit, done,
  };

  bool in_visit() const noexcept;
  bool number_digit_ok(char c) const noexcept;
  bool accepts_class(const TokenInfo& info) const;
  double draw(const BinSpec& bins, std::size_t bin);
  void reject(TokenId id);
  void finish_number();

  const Vocabulary* vocab_;
  ValueMode mode_;
  Rng rng_;
  State state_ = State::bos;
  std::size_t position_ = 0;
  std::optional<MalformedReport> error_;

  PatientRecord record_;
  double clock_ = 0.0;
  std::vector<bool> label_seen_;
  std::vector<bool> var_seen_;
  std::size_t number_var_ = 0;
  std::string number_text_;
};

DecodeResult decode(const TokenSequence& tokens, const Vocabulary& vocab, ValueMode mode = ValueMode::midpoint,
                    std::uint64_t seed = 0);

// Space-separated token strings. from_text throws ParseError on an unknown
// token.
std::string to_text(const TokenSequence& tokens, const Vocabulary& vocab);
TokenSequence from_text(const std::string& text, const Vocabulary& vocab);

// Shortens a sequence to at most `context` tokens by cutting after the last
// complete visit that fits and appending </s>. Returns nullopt when not even
// the first visit fits.
std::optional<TokenSequence> fit_to_context(const TokenSequence& tokens, const Vocabulary& vocab,
                                            std::size_t context);

// Repairs a generated stream that stopped before </s>: keeps everything up to
// the last </visit> and appends </s>. nullopt when no visit was closed.
std::optional<TokenSequence> salvage_truncated(const TokenSequence& tokens, const Vocabulary& vocab);

// Shortest fixed-notation text for a value, as used in digit-text mode.
std::string format_number(double value);

}  // namespace ehrgen::tok
