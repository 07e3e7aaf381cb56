#include "ehrgen/tok/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ehrgen/util/error.hpp"

namespace ehrgen::tok {

namespace {

constexpr std::size_t kMaxNumberChars = 24;

}  // namespace

const char* to_string(EncodeMode mode) { return mode == EncodeMode::binned ? "binned" : "digit-text"; }

EncodeMode encode_mode_from_string(const std::string& s) {
  if (s == "binned") return EncodeMode::binned;
  if (s == "digit-text") return EncodeMode::digit_text;
  throw Error("unknown encode mode '" + s + "' (binned | digit-text)");
}

const char* to_string(ValueMode mode) { return mode == ValueMode::midpoint ? "midpoint" : "uniform-sample"; }

ValueMode value_mode_from_string(const std::string& s) {
  if (s == "midpoint") return ValueMode::midpoint;
  if (s == "uniform-sample") return ValueMode::uniform_sample;
  throw Error("unknown value mode '" + s + "' (midpoint | uniform-sample)");
}

std::string MalformedReport::message() const {
  return "position " + std::to_string(position) + ": expected " + expected + ", found " + found;
}

std::string format_number(double value) {
  if (!std::isfinite(value)) throw NumericError("cannot format a non-finite value");
  if (value == 0.0) return "0";
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  if (res.ec != std::errc{}) throw NumericError("value too large to format");
  return std::string(buf, res.ptr);
}

TokenSequence encode(const PatientRecord& patient, const Vocabulary& vocab, EncodeMode mode) {
  const CohortSchema& schema = vocab.schema();
  const auto& vars = schema.variables();
  if (mode == EncodeMode::digit_text && !vocab.supports_digit_text()) {
    throw Error("vocabulary was built without digit-text tokens");
  }
  auto fail = [&](const std::string& what) { return Error("encode '" + patient.patient_id + "': " + what); };

  TokenSequence seq;
  seq.patient_id = patient.patient_id;
  auto& ids = seq.ids;
  ids.push_back(vocab.bos());
  ids.push_back(vocab.age_token(quantize(patient.covariates.age, vocab.age_bins())));
  auto gender = schema.gender_index(patient.covariates.gender);
  if (!gender) throw fail("unknown gender '" + patient.covariates.gender + "'");
  ids.push_back(vocab.gender_token(*gender));
  ids.push_back(vocab.end_covars());

  std::vector<std::pair<std::size_t, const Observation*>> ordered;
  for (const Visit& visit : patient.visits) {
    if (visit.labels.phenotypes.size() > schema.label_width()) throw fail("label vector wider than schema");
    if (visit.labels.mortality) ids.push_back(vocab.label_token(0));
    for (std::size_t i = 0; i < visit.labels.phenotypes.size(); ++i) {
      if (visit.labels.phenotypes[i]) ids.push_back(vocab.label_token(i + 1));
    }
    ids.push_back(vocab.end_labels());
    for (const CodeEvent& e : visit.events) {
      auto code = schema.code_index(e.code);
      if (!code) throw fail("code '" + e.code + "' not in vocabulary");
      ids.push_back(vocab.code_token(*code));
    }
    double prev = 0.0;
    for (const TimePoint& pt : visit.series.points) {
      ids.push_back(vocab.time_delta_token(quantize(pt.t - prev, vocab.time_delta_bins())));
      prev = pt.t;
      ordered.clear();
      for (const Observation& o : pt.observations) {
        auto var = schema.variable_index(o.variable);
        if (!var) throw fail("unknown variable '" + o.variable + "'");
        ordered.emplace_back(*var, &o);
      }
      std::stable_sort(ordered.begin(), ordered.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [v, o] : ordered) {
        if (vars[v].kind == VariableKind::numeric) {
          if (!std::holds_alternative<double>(o->value)) throw fail("variable '" + o->variable + "' needs a number");
          const double x = std::get<double>(o->value);
          if (mode == EncodeMode::binned) {
            ids.push_back(vocab.value_token(v, quantize(x, vocab.value_bins(v))));
          } else {
            ids.push_back(vocab.number_open_token(v));
            for (char c : format_number(x)) ids.push_back(vocab.digit_token(c));
            ids.push_back(vocab.number_close_token(v));
          }
        } else {
          if (!std::holds_alternative<std::string>(o->value)) {
            throw fail("variable '" + o->variable + "' needs a category");
          }
          auto level = schema.category_index(v, std::get<std::string>(o->value));
          if (!level) throw fail("category '" + std::get<std::string>(o->value) + "' not in vocabulary");
          ids.push_back(vocab.category_token(v, *level));
        }
      }
    }
    ids.push_back(vocab.end_ts());
    ids.push_back(vocab.end_visit());
  }
  ids.push_back(vocab.eos());
  return seq;
}

SequenceParser::SequenceParser(const Vocabulary& vocab, ValueMode mode, std::uint64_t seed)
    : vocab_(&vocab), mode_(mode), rng_(derive_seed(seed, 0xDEC0DE)) {
  label_seen_.assign(vocab.schema().label_width() + 1, false);
  var_seen_.assign(vocab.schema().variables().size(), false);
}

bool SequenceParser::in_visit() const noexcept {
  switch (state_) {
    case State::labels:
    case State::codes:
    case State::point_value:
    case State::point:
    case State::number:
    case State::end_visit:
      return true;
    default:
      return false;
  }
}

bool SequenceParser::number_digit_ok(char c) const noexcept {
  if (number_text_.size() >= kMaxNumberChars) return false;
  if (c == '-') return number_text_.empty();
  if (c == '.') {
    return !number_text_.empty() && number_text_.back() != '-' && number_text_.find('.') == std::string::npos;
  }
  return c >= '0' && c <= '9';
}

bool SequenceParser::accepts_class(const TokenInfo& info) const {
  const TokenClass c = info.cls;
  auto value_ok = [&] {
    return (c == TokenClass::value_bin || c == TokenClass::category || c == TokenClass::number_open) &&
           !var_seen_[info.a];
  };
  switch (state_) {
    case State::bos: return c == TokenClass::bos;
    case State::age: return c == TokenClass::age;
    case State::gender: return c == TokenClass::gender;
    case State::end_covars: return c == TokenClass::end_covars;
    case State::labels: return (c == TokenClass::label && !label_seen_[info.a]) || c == TokenClass::end_labels;
    case State::codes: return c == TokenClass::code || c == TokenClass::time_delta || c == TokenClass::end_ts;
    case State::point_value: return value_ok();
    case State::point: return value_ok() || c == TokenClass::time_delta || c == TokenClass::end_ts;
    case State::number:
      if (c == TokenClass::digit) return number_digit_ok(static_cast<char>(info.a));
      return c == TokenClass::number_close && info.a == number_var_ && !number_text_.empty() &&
             std::isdigit(static_cast<unsigned char>(number_text_.back()));
    case State::end_visit: return c == TokenClass::end_visit;
    case State::after_visit: return c == TokenClass::label || c == TokenClass::end_labels || c == TokenClass::eos;
    case State::done: return false;
  }
  return false;
}

bool SequenceParser::accepts(TokenId id) const {
  return !error_ && id < vocab_->size() && accepts_class(vocab_->info(id));
}

std::string SequenceParser::expected() const {
  switch (state_) {
    case State::bos: return "<s>";
    case State::age: return "age";
    case State::gender: return "gender";
    case State::end_covars: return "</covars>";
    case State::labels: return "label or </labels>";
    case State::codes: return "code, time-delta or </ts>";
    case State::point_value: return "value";
    case State::point: return "value, time-delta or </ts>";
    case State::number: {
      const auto& name = vocab_->schema().variables()[number_var_].name;
      return "digit or </" + name + ">";
    }
    case State::end_visit: return "</visit>";
    case State::after_visit: return "label, </labels> or </s>";
    case State::done: return "end of sequence";
  }
  return "?";
}

void SequenceParser::reject(TokenId id) {
  MalformedReport r;
  r.position = position_;
  r.expected = expected();
  r.found = id < vocab_->size() ? vocab_->token(id) : "id " + std::to_string(id);
  error_ = std::move(r);
}

double SequenceParser::draw(const BinSpec& bins, std::size_t bin) {
  if (mode_ == ValueMode::midpoint) return bins.midpoint(bin);
  return bins.lower(bin) + uniform01(rng_) * bins.width(bin);
}

void SequenceParser::finish_number() {
  double x = 0.0;
  const char* end = number_text_.data() + number_text_.size();
  auto res = std::from_chars(number_text_.data(), end, x);
  if (res.ec != std::errc{} || res.ptr != end) throw NumericError("unparseable number '" + number_text_ + "'");
  record_.visits.back().series.points.back().observations.push_back(
      {vocab_->schema().variables()[number_var_].name, x});
}

bool SequenceParser::feed(TokenId id) {
  if (error_) return false;
  if (!accepts(id)) {
    reject(id);
    return false;
  }
  const TokenInfo& info = vocab_->info(id);
  const CohortSchema& schema = vocab_->schema();
  auto start_visit = [&] {
    Visit v;
    v.labels.phenotypes.assign(schema.label_width(), false);
    record_.visits.push_back(std::move(v));
    std::fill(label_seen_.begin(), label_seen_.end(), false);
    clock_ = 0.0;
  };
  auto add_value = [&] {
    var_seen_[info.a] = true;
    auto& obs = record_.visits.back().series.points.back().observations;
    const auto& name = schema.variables()[info.a].name;
    if (info.cls == TokenClass::value_bin) {
      obs.push_back({name, draw(vocab_->value_bins(info.a), info.b)});
      state_ = State::point;
    } else if (info.cls == TokenClass::category) {
      obs.push_back({name, schema.variables()[info.a].categories[info.b]});
      state_ = State::point;
    } else {
      number_var_ = info.a;
      number_text_.clear();
      state_ = State::number;
    }
  };
  auto start_point = [&] {
    clock_ += draw(vocab_->time_delta_bins(), info.a);
    record_.visits.back().series.points.push_back({clock_, {}});
    std::fill(var_seen_.begin(), var_seen_.end(), false);
    state_ = State::point_value;
  };

  switch (info.cls) {
    case TokenClass::bos: state_ = State::age; break;
    case TokenClass::age:
      record_.covariates.age = draw(vocab_->age_bins(), info.a);
      state_ = State::gender;
      break;
    case TokenClass::gender:
      record_.covariates.gender = schema.covariates().genders[info.a];
      state_ = State::end_covars;
      break;
    case TokenClass::end_covars:
      start_visit();
      state_ = State::labels;
      break;
    case TokenClass::label:
      if (state_ == State::after_visit) start_visit();
      label_seen_[info.a] = true;
      if (info.a == 0) {
        record_.visits.back().labels.mortality = true;
      } else {
        record_.visits.back().labels.phenotypes[info.a - 1] = true;
      }
      state_ = State::labels;
      break;
    case TokenClass::end_labels:
      if (state_ == State::after_visit) start_visit();
      state_ = State::codes;
      break;
    case TokenClass::code:
      record_.visits.back().events.push_back({schema.codes()[info.a]});
      break;
    case TokenClass::time_delta: start_point(); break;
    case TokenClass::value_bin:
    case TokenClass::category:
    case TokenClass::number_open: add_value(); break;
    case TokenClass::digit: number_text_.push_back(static_cast<char>(info.a)); break;
    case TokenClass::number_close:
      finish_number();
      state_ = State::point;
      break;
    case TokenClass::end_ts: state_ = State::end_visit; break;
    case TokenClass::end_visit: state_ = State::after_visit; break;
    case TokenClass::eos: state_ = State::done; break;
    default: break;
  }
  ++position_;
  return true;
}

DecodeResult SequenceParser::finish(std::string patient_id) const {
  if (error_) return *error_;
  if (state_ != State::done) return MalformedReport{position_, expected(), "end of sequence"};
  PatientRecord out = record_;
  out.patient_id = std::move(patient_id);
  const CohortSchema& schema = vocab_->schema();
  for (auto& v : out.visits) {
    for (auto& pt : v.series.points) {
      std::stable_sort(pt.observations.begin(), pt.observations.end(), [&](const auto& a, const auto& b) {
        return *schema.variable_index(a.variable) < *schema.variable_index(b.variable);
      });
    }
  }
  return out;
}

DecodeResult decode(const TokenSequence& tokens, const Vocabulary& vocab, ValueMode mode, std::uint64_t seed) {
  SequenceParser parser(vocab, mode, seed);
  for (TokenId id : tokens.ids) {
    if (!parser.feed(id)) break;
  }
  return parser.finish(tokens.patient_id);
}

std::string to_text(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(tokens.ids[i]);
  }
  return out;
}

TokenSequence from_text(const std::string& text, const Vocabulary& vocab) {
  TokenSequence seq;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    auto id = vocab.find(tok);
    if (!id) throw ParseError("unknown token '" + tok + "'");
    seq.ids.push_back(*id);
  }
  return seq;
}

std::optional<TokenSequence> fit_to_context(const TokenSequence& tokens, const Vocabulary& vocab,
                                            std::size_t context) {
  if (tokens.size() <= context) return tokens;
  if (context < 2) return std::nullopt;
  for (std::size_t i = context - 1; i-- > 0;) {
    if (tokens.ids[i] == vocab.end_visit()) {
      TokenSequence out{{tokens.ids.begin(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(i + 1)},
                        tokens.patient_id};
      out.ids.push_back(vocab.eos());
      return out;
    }
  }
  return std::nullopt;
}

std::optional<TokenSequence> salvage_truncated(const TokenSequence& tokens, const Vocabulary& vocab) {
  auto it = std::find(tokens.ids.rbegin(), tokens.ids.rend(), vocab.end_visit());
  if (it == tokens.ids.rend()) return std::nullopt;
  TokenSequence out{{tokens.ids.begin(), it.base()}, tokens.patient_id};
  out.ids.push_back(vocab.eos());
  return out;
}

}  // namespace ehrgen::tok
