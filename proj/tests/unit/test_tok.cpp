#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ehrgen/sim/simulator.hpp"
#include "ehrgen/tok/codec.hpp"
#include "ehrgen/tok/token_io.hpp"
#include "ehrgen/util/error.hpp"
#include "fixtures.hpp"

using namespace ehrgen;
using namespace ehrgen::tok;
using ehrgen::testing::small_cohort;
using ehrgen::testing::small_patient;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ehrgen_test_" + name)).string();
}

Vocabulary small_vocab(bool digits = false) {
  VocabularyConfig cfg;
  cfg.digit_text = digits;
  return build_vocabulary(small_cohort(), cfg);
}

std::string text_of(const PatientRecord& p, const Vocabulary& v, EncodeMode m = EncodeMode::binned) {
  return to_text(encode(p, v, m), v);
}

// Kolmogorov distribution tail P(K > x).
double kolmogorov_p(double x) {
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST(Bins, HeartRateExample) {
  std::vector<double> hr = {55.0, 100.0, 165.0, 70.0};
  BinSpec b = fit_bins("HR", BinKind::numeric_value, hr, 10);
  EXPECT_EQ(b.bins(), 10u);
  EXPECT_DOUBLE_EQ(b.lower(0), 55.0);
  EXPECT_DOUBLE_EQ(b.upper(0), 66.0);
  EXPECT_DOUBLE_EQ(b.upper(9), 165.0);
  EXPECT_EQ(quantize(60.0, b), 0u);
  EXPECT_EQ(quantize(66.0, b), 1u);   // interior edge goes up
  EXPECT_EQ(quantize(40.0, b), 0u);   // clamped
  EXPECT_EQ(quantize(165.0, b), 9u);  // top edge inclusive
  EXPECT_EQ(quantize(500.0, b), 9u);
  EXPECT_THROW(quantize(std::nan(""), b), NumericError);
  EXPECT_THROW(quantize(INFINITY, b), NumericError);
}

TEST(Bins, DegenerateRangeIsWidened) {
  std::vector<double> v = {5.0, 5.0};
  BinSpec b = fit_bins("X", BinKind::numeric_value, v, 3);
  ASSERT_EQ(b.bins(), 3u);
  EXPECT_DOUBLE_EQ(b.lower(0), 4.5);
  EXPECT_DOUBLE_EQ(b.upper(2), 5.5);
  EXPECT_NEAR(b.width(0), 1.0 / 3.0, 1e-12);
  std::vector<double> zero = {0.0};
  BinSpec z = fit_bins("X", BinKind::numeric_value, zero, 2);
  EXPECT_DOUBLE_EQ(z.lower(0), -0.5);
  EXPECT_DOUBLE_EQ(z.upper(1), 0.5);
  BinSpec dt = fit_bins("DT", BinKind::time_delta, zero, 2);
  EXPECT_GE(dt.lower(0), 0.0);
  std::vector<double> none;
  EXPECT_THROW(fit_bins("X", BinKind::numeric_value, none, 3), Error);
}

TEST(Vocabulary, LayoutAndLookups) {
  const Vocabulary v = small_vocab();
  EXPECT_EQ(v.token(Vocabulary::kPad), "<PAD>");
  EXPECT_EQ(v.token(v.bos()), "<s>");
  // specials + age + gender + labels + deltas + codes + HR/LACT bins + GCS levels
  EXPECT_EQ(v.size(), 7u + 10 + 2 + 4 + 10 + 3 + 20 + 3);
  for (TokenId id = 0; id < v.size(); ++id) EXPECT_EQ(v.find(v.token(id)), id);
  EXPECT_EQ(v.token(v.value_token(0, 0)), "<HR_0>");
  EXPECT_EQ(v.token(v.category_token(2, 2)), "<GCS=mild>");
  EXPECT_EQ(v.token(v.code_token(1)), "<CODE_B2>");
  EXPECT_EQ(v.token(v.label_token(0)), "<MORTALITY>");
  EXPECT_EQ(v.token(v.label_token(3)), "<PHENO_2>");
  EXPECT_FALSE(v.find("<HR>"));
  EXPECT_THROW(v.value_token(2, 0), Error);
}

TEST(Vocabulary, EdgesCoverTrainingRange) {
  const Vocabulary v = small_vocab();
  EXPECT_DOUBLE_EQ(v.value_bins(0).lower(0), 55.0);
  EXPECT_DOUBLE_EQ(v.value_bins(0).upper(9), 165.0);
  EXPECT_DOUBLE_EQ(v.age_bins().lower(0), 25.0);
  EXPECT_DOUBLE_EQ(v.time_delta_bins().lower(0), 0.0);
}

TEST(Vocabulary, FullScaleTokenCount) {
  // 4656 codes, 36 numeric and 5 categorical variables, 25 phenotypes.
  SchemaDefinition d;
  for (int i = 0; i < 4656; ++i) d.codes.push_back("C" + std::to_string(i));
  for (int i = 0; i < 36; ++i) d.variables.push_back({"N" + std::to_string(i), VariableKind::numeric, {}});
  for (int i = 0; i < 5; ++i) {
    std::vector<std::string> levels;
    for (int k = 0; k < 6; ++k) levels.push_back("l" + std::to_string(k));
    d.variables.push_back({"K" + std::to_string(i), VariableKind::categorical, levels});
  }
  d.covariates = {0.0, 100.0, {"F", "M"}};
  Cohort c;
  c.schema = CohortSchema(d);
  PatientRecord p;
  p.patient_id = "x";
  p.covariates = {50.0, "F"};
  Visit visit;
  visit.labels.phenotypes.assign(25, false);
  TimePoint pt{1.0, {}};
  for (int i = 0; i < 36; ++i) pt.observations.push_back({"N" + std::to_string(i), double(i)});
  visit.series.points.push_back(pt);
  p.visits.push_back(visit);
  c.patients.push_back(p);
  const Vocabulary v = build_vocabulary(c);
  EXPECT_GE(v.size(), 5000u);
  EXPECT_LE(v.size(), 5250u);
  EXPECT_EQ(v.size(), 7u + 10 + 2 + 26 + 10 + 4656 + 360 + 30);
}

TEST(Vocabulary, NumericVariableWithoutObservationsFails) {
  Cohort c = small_cohort();
  for (auto& p : c.patients)
    for (auto& v : p.visits)
      for (auto& pt : v.series.points)
        std::erase_if(pt.observations, [](const Observation& o) { return o.variable == "LACT"; });
  EXPECT_THROW(build_vocabulary(c), Error);
  Cohort empty;
  empty.schema = c.schema;
  EXPECT_THROW(build_vocabulary(empty), Error);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  const Vocabulary v = small_vocab(true);
  const std::string path = tmp_path("vocab.json");
  save_vocabulary(path, v, nlohmann::json{{"k", 1}});
  const Vocabulary back = load_vocabulary(path);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.all_value_bins(), v.all_value_bins());
  EXPECT_EQ(back.time_delta_bins(), v.time_delta_bins());
  EXPECT_EQ(back.config(), v.config());

  std::string content;
  {
    std::ifstream in(path);
    content.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path);
    out << content.substr(0, content.size() / 2);
  }
  EXPECT_THROW(load_vocabulary(path), Error);

  auto j = vocabulary_to_json(v);
  j["format_version"] = 2;
  EXPECT_THROW(vocabulary_from_json(j), VersionError);
  j = vocabulary_to_json(v);
  j["tokens"][5] = "<bogus>";
  EXPECT_THROW(vocabulary_from_json(j), Error);
  std::filesystem::remove(path);
}

TEST(Vocabulary, EmptyCodeUniverseLoadsBack) {
  Cohort c = small_cohort();
  SchemaDefinition d = c.schema.definition();
  d.codes.clear();
  c.schema = CohortSchema(d);
  for (auto& p : c.patients)
    for (auto& v : p.visits) v.events.clear();
  const Vocabulary v = build_vocabulary(c);
  const Vocabulary back = vocabulary_from_json(vocabulary_to_json(v));
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.class_counts().count("code"), 0u);
}

TEST(Encode, MinimalGrammarInstance) {
  const Vocabulary v = small_vocab();
  PatientRecord p;
  p.patient_id = "m";
  p.covariates = {25.0, "M"};
  Visit visit;
  visit.labels.phenotypes.assign(3, false);
  p.visits.push_back(visit);
  EXPECT_EQ(text_of(p, v), "<s> <AGE_0> <GENDER_M> </covars> </labels> </ts> </visit> </s>");
}

TEST(Encode, FullExample) {
  const Vocabulary v = small_vocab();
  const std::string t = text_of(small_patient(), v);
  // age 63 in [25, 80]: bin floor((63-25)/5.5) = 6. HR 88: bin floor(33/11)=3, HR 120: 5.
  EXPECT_EQ(t,
            "<s> <AGE_6> <GENDER_F> </covars> <MORTALITY> <PHENO_1> </labels> <CODE_B2> <CODE_A1> <CODE_B2> "
            "<DT_0> <HR_3> <LACT_9> <DT_0> <GCS=mild> <DT_2> <HR_5> <GCS=severe> </ts> </visit> "
            "</labels> <DT_1> <LACT_0> </ts> </visit> </s>");
}

TEST(Encode, GroupsSameTimestampUnderOneDelta) {
  const Vocabulary v = small_vocab();
  const auto seq = encode(small_patient(), v);
  std::size_t deltas = 0;
  for (auto id : seq.ids) deltas += v.token_class(id) == TokenClass::time_delta;
  EXPECT_EQ(deltas, 4u);
}

TEST(Encode, ObservationsFollowRegistryOrder) {
  const Vocabulary v = small_vocab();
  PatientRecord p = small_patient();
  auto& obs = p.visits[0].series.points[0].observations;
  std::reverse(obs.begin(), obs.end());
  EXPECT_EQ(encode(p, v).ids, encode(small_patient(), v).ids);
}

TEST(Encode, DigitTextUsesMoreTokens) {
  const Vocabulary v = small_vocab(true);
  PatientRecord p;
  p.patient_id = "l";
  p.covariates = {40.0, "F"};
  Visit visit;
  visit.labels.phenotypes.assign(3, false);
  visit.series.points = {{1.0, {{"LACT", 2.5}}}};
  p.visits = {visit};
  const auto binned = encode(p, v), digits = encode(p, v, EncodeMode::digit_text);
  EXPECT_EQ(digits.size() - binned.size(), 4u);  // <LACT> <#2> <#.> <#5> </LACT> replaces one token
  EXPECT_NE(text_of(p, v, EncodeMode::digit_text).find("<LACT> <#2> <#.> <#5> </LACT>"), std::string::npos);
  EXPECT_THROW(encode(p, small_vocab(false), EncodeMode::digit_text), Error);
}

TEST(Encode, UnknownCodeFails) {
  const Vocabulary v = small_vocab();
  PatientRecord p = small_patient();
  p.visits[0].events[0].code = "ZZ";
  EXPECT_THROW(encode(p, v), Error);
}

TEST(FormatNumber, ShortestFixed) {
  EXPECT_EQ(format_number(2.5), "2.5");
  EXPECT_EQ(format_number(120.0), "120");
  EXPECT_EQ(format_number(-0.25), "-0.25");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_THROW(format_number(NAN), NumericError);
}

TEST(Decode, MidpointRoundTrip) {
  const Cohort c = small_cohort();
  const Vocabulary v = small_vocab();
  for (const auto& p : c.patients) {
    auto res = decode(encode(p, v), v);
    ASSERT_TRUE(std::holds_alternative<PatientRecord>(res)) << std::get<MalformedReport>(res).message();
    const auto& d = std::get<PatientRecord>(res);
    EXPECT_EQ(d.patient_id, p.patient_id);
    ASSERT_EQ(d.visits.size(), p.visits.size());
    for (std::size_t i = 0; i < p.visits.size(); ++i) {
      EXPECT_EQ(d.visits[i].labels, p.visits[i].labels);
      EXPECT_EQ(d.visits[i].events, p.visits[i].events);
      ASSERT_EQ(d.visits[i].series.points.size(), p.visits[i].series.points.size());
    }
  }
}

TEST(Decode, MissingEndLabelsReportsPosition) {
  const Vocabulary v = small_vocab();
  TokenSequence seq = encode(small_patient(), v);
  auto it = std::find(seq.ids.begin(), seq.ids.end(), v.end_labels());
  const auto pos = static_cast<std::size_t>(it - seq.ids.begin());
  seq.ids.erase(it);
  auto res = decode(seq, v);
  ASSERT_TRUE(std::holds_alternative<MalformedReport>(res));
  const auto& r = std::get<MalformedReport>(res);
  EXPECT_EQ(r.position, pos);
  EXPECT_EQ(r.expected, "label or </labels>");
  EXPECT_EQ(r.found, "<CODE_B2>");
}

TEST(Decode, RejectsStructuralErrors) {
  const Vocabulary v = small_vocab();
  auto malformed_at = [&](const std::string& text) -> std::optional<std::size_t> {
    auto res = decode(from_text(text, v), v);
    if (auto* r = std::get_if<MalformedReport>(&res)) return r->position;
    return std::nullopt;
  };
  const std::string head = "<s> <AGE_0> <GENDER_M> </covars> ";
  EXPECT_FALSE(malformed_at(head + "</labels> </ts> </visit> </s>"));
  EXPECT_EQ(malformed_at(head + "<PHENO_0> <PHENO_0> </labels> </ts> </visit> </s>"), 5u);
  EXPECT_EQ(malformed_at(head + "</labels> <DT_0> </ts> </visit> </s>"), 6u);  // empty time point
  EXPECT_EQ(malformed_at(head + "</labels> <DT_0> <HR_1> <HR_2> </ts> </visit> </s>"), 7u);
  EXPECT_EQ(malformed_at(head + "</labels> <DT_0> <HR_1> <CODE_A1> </ts> </visit> </s>"), 7u);
  EXPECT_EQ(malformed_at(head + "</labels> </ts> </visit>"), 7u);  // ended early
  EXPECT_EQ(malformed_at(head + "</labels> </ts> </visit> </s> </s>"), 8u);
  EXPECT_EQ(malformed_at("<AGE_0>"), 0u);
  EXPECT_EQ(malformed_at(""), 0u);
  EXPECT_EQ(malformed_at(head + "</labels> </ts> <PAD> </visit> </s>"), 6u);
  // a fresh visit may start directly after </visit>
  EXPECT_FALSE(malformed_at(head + "</labels> </ts> </visit> <MORTALITY> </labels> </ts> </visit> </s>"));
}

TEST(Decode, DigitTextNumbers) {
  const Vocabulary v = small_vocab(true);
  auto parse = [&](const std::string& number_tokens) {
    return decode(from_text("<s> <AGE_0> <GENDER_M> </covars> </labels> <DT_0> " + number_tokens +
                                " </ts> </visit> </s>",
                            v),
                  v);
  };
  auto res = parse("<HR> <#-> <#1> <#2> <#.> <#0> <#5> </HR>");
  ASSERT_TRUE(std::holds_alternative<PatientRecord>(res));
  EXPECT_DOUBLE_EQ(std::get<double>(std::get<PatientRecord>(res).visits[0].series.points[0].observations[0].value),
                   -12.05);
  for (const char* bad : {"<HR> </HR>", "<HR> <#-> </HR>", "<HR> <#1> <#.> </HR>", "<HR> <#.> <#1> </HR>",
                          "<HR> <#1> <#-> </HR>", "<HR> <#1> <#.> <#2> <#.> </HR>", "<HR> <#1> </LACT>"}) {
    EXPECT_TRUE(std::holds_alternative<MalformedReport>(parse(bad))) << bad;
  }
}

TEST(Decode, DigitTextRoundTripIsExact) {
  const Vocabulary v = small_vocab(true);
  for (const auto& p : small_cohort().patients) {
    auto res = decode(encode(p, v, EncodeMode::digit_text), v);
    ASSERT_TRUE(std::holds_alternative<PatientRecord>(res));
    const auto& d = std::get<PatientRecord>(res);
    for (std::size_t i = 0; i < p.visits.size(); ++i)
      for (std::size_t t = 0; t < p.visits[i].series.points.size(); ++t)
        EXPECT_EQ(d.visits[i].series.points[t].observations, p.visits[i].series.points[t].observations);
  }
}

TEST(Decode, UniformSampleIsUniformWithinBin) {
  const Vocabulary v = small_vocab();
  const TokenSequence seq =
      from_text("<s> <AGE_0> <GENDER_M> </covars> </labels> <DT_0> <HR_4> </ts> </visit> </s>", v);
  const BinSpec& bins = v.value_bins(0);
  std::vector<double> u;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    auto d = std::get<PatientRecord>(decode(seq, v, ValueMode::uniform_sample, seed));
    const double x = std::get<double>(d.visits[0].series.points[0].observations[0].value);
    ASSERT_GE(x, bins.lower(4));
    ASSERT_LT(x, bins.upper(4));
    u.push_back((x - bins.lower(4)) / bins.width(4));
  }
  std::sort(u.begin(), u.end());
  double dmax = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    dmax = std::max({dmax, (i + 1) / n - u[i], u[i] - i / n});
  }
  EXPECT_GT(kolmogorov_p(std::sqrt(n) * dmax), 0.01);
  // Same seed, same draw.
  EXPECT_EQ(std::get<PatientRecord>(decode(seq, v, ValueMode::uniform_sample, 7)),
            std::get<PatientRecord>(decode(seq, v, ValueMode::uniform_sample, 7)));
}

TEST(Codec, SimulatedCorpusRoundTripsWithinBinBounds) {
  const Cohort c = sim::simulate(sim::default_spec(300, 4));
  const Vocabulary v = build_vocabulary(c);
  const auto& schema = v.schema();
  for (const auto& p : c.patients) {
    auto res = decode(encode(p, v), v);
    ASSERT_TRUE(std::holds_alternative<PatientRecord>(res)) << std::get<MalformedReport>(res).message();
    const auto& d = std::get<PatientRecord>(res);
    ASSERT_EQ(d.visits.size(), p.visits.size());
    for (std::size_t i = 0; i < p.visits.size(); ++i) {
      const auto& a = p.visits[i].series.points;
      const auto& b = d.visits[i].series.points;
      ASSERT_EQ(a.size(), b.size());
      double bound = 0.0, prev = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) {
        const auto bin = quantize(a[t].t - prev, v.time_delta_bins());
        prev = a[t].t;
        bound += v.time_delta_bins().width(bin) / 2 + 1e-9;
        EXPECT_LE(std::abs(a[t].t - b[t].t), bound);
        ASSERT_EQ(a[t].observations.size(), b[t].observations.size());
        for (std::size_t o = 0; o < a[t].observations.size(); ++o) {
          EXPECT_EQ(a[t].observations[o].variable, b[t].observations[o].variable);
          if (auto* x = std::get_if<double>(&a[t].observations[o].value)) {
            const auto k = *schema.variable_index(a[t].observations[o].variable);
            const BinSpec& bs = v.value_bins(k);
            const double half = bs.width(quantize(*x, bs)) / 2 + 1e-9;
            EXPECT_LE(std::abs(*x - std::get<double>(b[t].observations[o].value)), half);
          } else {
            EXPECT_EQ(a[t].observations[o].value, b[t].observations[o].value);
          }
        }
      }
    }
  }
}

TEST(Codec, ParserAcceptsEveryEncodedTokenWithOneLookahead) {
  const Cohort c = sim::simulate(sim::default_spec(100, 12));
  VocabularyConfig cfg;
  cfg.digit_text = true;
  const Vocabulary v = build_vocabulary(c, cfg);
  for (EncodeMode mode : {EncodeMode::binned, EncodeMode::digit_text}) {
    for (const auto& p : c.patients) {
      const auto seq = encode(p, v, mode);
      SequenceParser parser(v);
      for (TokenId id : seq.ids) {
        ASSERT_TRUE(parser.accepts(id));
        ASSERT_TRUE(parser.feed(id));
      }
      EXPECT_TRUE(parser.complete());
      EXPECT_EQ(parser.visits(), p.visits.size());
    }
  }
}

TEST(Codec, EncodeIsDeterministic) {
  const Cohort c = sim::simulate(sim::default_spec(20, 1));
  const Vocabulary a = build_vocabulary(c), b = build_vocabulary(c);
  EXPECT_EQ(a.tokens(), b.tokens());
  for (const auto& p : c.patients) EXPECT_EQ(encode(p, a).ids, encode(p, b).ids);
}

TEST(Codec, TextRoundTripAndUnknownToken) {
  const Vocabulary v = small_vocab();
  const auto seq = encode(small_patient(), v);
  EXPECT_EQ(from_text(to_text(seq, v), v).ids, seq.ids);
  EXPECT_THROW(from_text("<s> <nope>", v), ParseError);
}

TEST(Codec, FitToContextCutsAtVisitBoundary) {
  const Vocabulary v = small_vocab();
  const auto seq = encode(small_patient(), v);
  EXPECT_EQ(fit_to_context(seq, v, seq.size())->ids, seq.ids);
  auto cut = fit_to_context(seq, v, seq.size() - 1);
  ASSERT_TRUE(cut);
  EXPECT_LE(cut->size(), seq.size() - 1);
  auto d = decode(*cut, v);
  ASSERT_TRUE(std::holds_alternative<PatientRecord>(d));
  EXPECT_EQ(std::get<PatientRecord>(d).visits.size(), 1u);
  EXPECT_FALSE(fit_to_context(seq, v, 10));
}

TEST(Codec, SalvageDropsIncompleteVisit) {
  const Vocabulary v = small_vocab();
  auto seq = encode(small_patient(), v);
  seq.ids.resize(seq.ids.size() - 3);  // inside the second visit
  auto fixed = salvage_truncated(seq, v);
  ASSERT_TRUE(fixed);
  auto d = decode(*fixed, v);
  ASSERT_TRUE(std::holds_alternative<PatientRecord>(d));
  EXPECT_EQ(std::get<PatientRecord>(d).visits.size(), 1u);
  seq.ids.resize(8);
  EXPECT_FALSE(salvage_truncated(seq, v));
}

TEST(TokenIo, TextAndBinaryRoundTrip) {
  const Cohort c = small_cohort();
  const Vocabulary v = small_vocab();
  std::vector<TokenSequence> seqs;
  for (const auto& p : c.patients) seqs.push_back(encode(p, v));
  const std::string txt = tmp_path("tokens.txt"), bin = tmp_path("tokens.bin");
  write_token_text(txt, seqs, v, nlohmann::json{{"mode", "binned"}});
  write_token_binary(bin, seqs);
  EXPECT_EQ(read_token_text(txt, v), seqs);
  auto back = read_token_binary(bin, v.size());
  ASSERT_EQ(back.size(), seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_EQ(back[i].ids, seqs[i].ids);
  EXPECT_THROW(read_token_binary(bin, 5), Error);
  std::filesystem::resize_file(bin, std::filesystem::file_size(bin) - 2);
  EXPECT_THROW(read_token_binary(bin, v.size()), Error);
  std::filesystem::remove(txt);
  std::filesystem::remove(bin);
}
