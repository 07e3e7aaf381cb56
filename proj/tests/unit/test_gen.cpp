#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "ehrgen/core/validate.hpp"
#include "ehrgen/gen/generate.hpp"
#include "ehrgen/lm/incremental.hpp"
#include "ehrgen/lm/trainer.hpp"
#include "ehrgen/sim/simulator.hpp"
#include "ehrgen/util/error.hpp"
#include "fixtures.hpp"

using namespace ehrgen;
using namespace ehrgen::gen;

namespace {

std::vector<double> softmax(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0;
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - m);
  for (auto& v : p) v /= s;
  return p;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return tv / 2;
}

std::vector<double> empirical(std::span<const float> logits, const SamplingConfig& c, std::size_t draws,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(logits.size(), 0.0);
  for (std::size_t i = 0; i < draws; ++i) f[sample_token(logits, c, rng)] += 1.0;
  for (auto& v : f) v /= static_cast<double>(draws);
  return f;
}

tok::Vocabulary small_vocab() {
  return tok::build_vocabulary(ehrgen::testing::small_cohort(), {});
}

lm::ModelConfig model_for(const tok::Vocabulary& v, std::size_t context = 64) {
  lm::ModelConfig c;
  c.vocab_size = v.size();
  c.context = context;
  c.layers = 1;
  c.heads = 2;
  c.dim = 16;
  c.dropout = 0.0;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Sampler, DistributionMatchesHandComputation) {
  const std::vector<float> logits = {1.0f, 3.0f, 2.0f, 0.5f};
  SamplingConfig c{0.5, 2, false};
  const auto p = sampling_distribution(logits, c);
  const auto ref = softmax({3.0 / 0.5, 2.0 / 0.5});
  EXPECT_NEAR(p[1], ref[0], 1e-12);
  EXPECT_NEAR(p[2], ref[1], 1e-12);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[3], 0.0);
}

TEST(Sampler, TopKLargerThanVocabKeepsAll) {
  const std::vector<float> logits = {0.0f, 1.0f, 2.0f};
  const auto p = sampling_distribution(logits, {1.0, 50, false});
  const auto ref = softmax({0.0, 1.0, 2.0});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], ref[i], 1e-12);
}

TEST(Sampler, TiesGoToLowerId) {
  const std::vector<float> logits = {1.0f, 2.0f, 2.0f, 2.0f};
  const auto p = sampling_distribution(logits, {1.0, 2, false});
  EXPECT_NEAR(p[1], 0.5, 1e-12);
  EXPECT_NEAR(p[2], 0.5, 1e-12);
  EXPECT_EQ(p[3], 0.0);
  Rng rng(1);
  EXPECT_EQ(sample_token(logits, {1.0, 1, false}, rng), 1u);
}

TEST(Sampler, GreedyEqualsTopKOne) {
  Rng rng(9);
  std::vector<float> logits(20);
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& l : logits) l = static_cast<float>(uniform01(rng) * 10 - 5);
    Rng a(trial), b(trial + 1000);
    const auto g = sample_token(logits, {0.7, 50, true}, a);
    const auto k1 = sample_token(logits, {0.7, 1, false}, b);
    EXPECT_EQ(g, k1);
    EXPECT_EQ(g, static_cast<lm::Token>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
}

TEST(Sampler, RejectsBadSettings) {
  const std::vector<float> logits = {0.0f, 1.0f};
  Rng rng(0);
  EXPECT_THROW(sample_token(logits, {0.0, 5, false}, rng), PreconditionError);
  EXPECT_THROW(sample_token(logits, {1.0, 0, false}, rng), PreconditionError);
  EXPECT_NO_THROW(sample_token(logits, {0.0, 5, true}, rng));
}

TEST(Sampler, EmpiricalFrequenciesOnThreeTokens) {
  const std::vector<float> logits = {0.2f, 1.0f, -0.4f};
  for (std::size_t k : {1u, 2u, 3u}) {
    SamplingConfig c{0.7, k, false};
    // Independent oracle: renormalised softmax over the k largest.
    std::vector<double> z = {0.2 / 0.7, 1.0 / 0.7, -0.4 / 0.7};
    std::vector<double> ref(3, 0.0);
    std::vector<std::size_t> order = {1, 0, 2};
    std::vector<double> kept;
    for (std::size_t i = 0; i < k; ++i) kept.push_back(z[order[i]]);
    const auto pk = softmax(kept);
    for (std::size_t i = 0; i < k; ++i) ref[order[i]] = pk[i];
    const auto f = empirical(logits, c, 10000, 42 + k);
    EXPECT_LT(total_variation(f, ref), 0.02) << "k=" << k;
  }
}

TEST(Sampler, EmpiricalFrequenciesFromModelLogits) {
  const auto vocab = small_vocab();
  lm::Model model(model_for(vocab));
  for (auto& p : model.parameters()) p *= 40.0f;  // sharpen the distribution
  lm::IncrementalDecoder dec(model);
  dec.step(vocab.bos());
  const auto span = dec.step(vocab.age_token(3));
  const std::vector<float> logits(span.begin(), span.end());
  SamplingConfig c{0.7, 5, false};
  const auto ref = sampling_distribution(logits, c);
  const auto f = empirical(logits, c, 10000, 5);
  EXPECT_LT(total_variation(f, ref), 0.02);
}

TEST(Sample, StartsWithBosAndRespectsLimit) {
  const auto vocab = small_vocab();
  lm::Model model(model_for(vocab, 32));
  GenConfig g;
  g.temperature = 1.0;
  g.max_tokens = 20;
  const auto s = sample_sequence(model, vocab, g, 7);
  EXPECT_EQ(s.tokens.ids.front(), vocab.bos());
  EXPECT_LE(s.tokens.size(), 20u);
  EXPECT_TRUE(s.truncated == (s.tokens.ids.back() != vocab.eos()));
  EXPECT_EQ(sample_sequence(model, vocab, g, 7).tokens, s.tokens);
}

TEST(Sample, GreedyIgnoresSeed) {
  const auto vocab = small_vocab();
  lm::Model model(model_for(vocab));
  GenConfig g;
  g.greedy = true;
  EXPECT_EQ(sample_sequence(model, vocab, g, 1).tokens, sample_sequence(model, vocab, g, 99).tokens);
}

TEST(Sample, VocabularyMismatchRejected) {
  const auto vocab = small_vocab();
  auto c = model_for(vocab);
  c.vocab_size += 1;
  lm::Model model(c);
  EXPECT_THROW(sample_sequence(model, vocab, {}, 0), PreconditionError);
}

TEST(Generate, ZeroTargetGivesEmptyCohort) {
  const auto vocab = small_vocab();
  lm::Model model(model_for(vocab));
  GenConfig g;
  g.count = 0;
  const auto r = generate_cohort(model, vocab, g);
  EXPECT_EQ(r.cohort.size(), 0u);
  EXPECT_EQ(r.stats.attempts, 0u);
  EXPECT_EQ(r.stats.malformed_rate, 0.0);
  EXPECT_EQ(r.stats.truncation_rate, 0.0);
  EXPECT_EQ(r.stats.mean_length, 0.0);
}

TEST(Generate, UntrainedModelExhaustsRetryBudget) {
  const auto vocab = small_vocab();
  lm::Model model(model_for(vocab));
  GenConfig g;
  g.count = 3;
  g.max_retries = 2;
  g.temperature = 1.0;
  try {
    generate_cohort(model, vocab, g);
    FAIL() << "expected retry budget error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("malformed rate"), std::string::npos);
  }
}

TEST(Generate, MemorisedPatientReproducedGreedily) {
  const auto vocab = small_vocab();
  const auto target = tok::encode(ehrgen::testing::small_patient(), vocab);
  lm::Model model(model_for(vocab));
  lm::TrainConfig t;
  t.epochs = 150;
  t.learning_rate = 1e-2;
  t.batch_size = 1;
  t.grad_accum = 1;
  t.schedule = lm::LrSchedule::constant;
  lm::train(model, std::vector<std::vector<lm::Token>>{target.ids}, t);

  GenConfig g;
  g.greedy = true;
  g.count = 2;
  g.value_mode = tok::ValueMode::midpoint;
  const auto r = generate_cohort(model, vocab, g);
  ASSERT_EQ(r.cohort.size(), 2u);
  EXPECT_EQ(r.sequences[0].ids, target.ids);
  EXPECT_EQ(r.sequences[1].ids, target.ids);
  EXPECT_EQ(r.stats.malformed, 0u);
  EXPECT_EQ(r.cohort.patients[0].patient_id, "synthetic-0");
  EXPECT_EQ(r.cohort.splits[1], Split::synthetic);
}

TEST(Generate, SimulatorTrainedModelEmitsValidCohort) {
  const auto cohort = sim::simulate(sim::default_spec(200, 11));
  const auto vocab = tok::build_vocabulary(cohort, {});
  std::vector<std::vector<lm::Token>> corpus;
  for (const auto& p : cohort.patients) {
    auto s = tok::fit_to_context(tok::encode(p, vocab), vocab, 256);
    if (s) corpus.push_back(s->ids);
  }
  lm::ModelConfig c = model_for(vocab, 256);
  c.dim = 32;
  c.heads = 2;
  lm::Model model(c);
  lm::TrainConfig t;
  t.epochs = 20;
  t.learning_rate = 5e-3;
  t.batch_size = 8;
  t.grad_accum = 1;
  lm::train(model, corpus, t);

  GenConfig g;
  g.count = 100;
  g.seed = 21;
  g.max_retries = 50;
  const auto r = generate_cohort(model, vocab, g);
  ASSERT_EQ(r.cohort.size(), 100u);
  EXPECT_TRUE(validate_cohort(r.cohort).empty());
  EXPECT_GE(r.stats.attempts, 100u);
  EXPECT_EQ(r.stats.attempts, 100u + r.stats.malformed);
  EXPECT_GE(r.stats.malformed_rate, 0.0);
  EXPECT_LT(r.stats.malformed_rate, 1.0);
  // Every decoded value lies inside its bin, checked by re-encoding.
  for (std::size_t i = 0; i < r.cohort.size(); ++i) {
    EXPECT_EQ(tok::encode(r.cohort.patients[i], vocab).ids, r.sequences[i].ids) << i;
  }
  const auto again = generate_cohort(model, vocab, g);
  EXPECT_EQ(again.sequences, r.sequences);
  EXPECT_EQ(again.cohort.patients, r.cohort.patients);
}
