#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ehrgen/metrics/boosting.hpp"
#include "ehrgen/metrics/correlation.hpp"
#include "ehrgen/metrics/ngram.hpp"
#include "ehrgen/metrics/prdc.hpp"
#include "ehrgen/metrics/privacy.hpp"
#include "ehrgen/metrics/report.hpp"
#include "ehrgen/metrics/stats.hpp"
#include "ehrgen/metrics/ts_embedding.hpp"
#include "ehrgen/metrics/utility.hpp"
#include "ehrgen/sim/simulator.hpp"
#include "ehrgen/util/error.hpp"
#include "fixtures.hpp"

using namespace ehrgen;
using namespace ehrgen::metrics;

namespace {

// Cohort over codes c0..c{n-1} with code lists per visit and no time series.
Cohort code_cohort(std::size_t n_codes, const std::vector<std::vector<std::vector<int>>>& patients) {
  SchemaDefinition d;
  for (std::size_t i = 0; i < n_codes; ++i) d.codes.push_back("c" + std::to_string(i));
  d.variables = {{"HR", VariableKind::numeric, {}}};
  d.covariates = {0.0, 100.0, {"F", "M"}};
  d.label_width = 0;
  Cohort c;
  c.schema = CohortSchema(d);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    PatientRecord p;
    p.patient_id = "p" + std::to_string(i);
    p.covariates = {50.0, "F"};
    for (const auto& codes : patients[i]) {
      Visit v;
      for (int k : codes) v.events.push_back({"c" + std::to_string(k)});
      p.visits.push_back(v);
    }
    c.patients.push_back(p);
  }
  c.splits.assign(c.size(), Split::unassigned);
  return c;
}

Cohort random_code_cohort(std::size_t patients, std::size_t n_codes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::vector<int>>> ps(patients);
  for (auto& p : ps) {
    p.resize(1 + rng() % 3);
    for (auto& v : p) {
      v.resize(rng() % 6);
      for (auto& c : v) c = static_cast<int>(rng() % n_codes);
    }
  }
  return code_cohort(n_codes, ps);
}

// Independent n-gram counter over code strings joined with '|'.
std::map<std::string, double> brute_ngrams(const Cohort& c, int n) {
  std::map<std::string, double> m;
  for (const auto& p : c.patients) {
    for (const auto& v : p.visits) {
      for (int i = 0; i + n <= static_cast<int>(v.events.size()); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) key += v.events[static_cast<std::size_t>(i + k)].code + "|";
        m[key] += 1.0 / static_cast<double>(c.size());
      }
    }
  }
  return m;
}

Matrix random_points(std::size_t n, std::size_t dim, std::mt19937_64& rng, double shift = 0.0) {
  std::normal_distribution<double> nd(shift, 1.0);
  Matrix m(n, dim);
  for (auto& v : m.data) v = nd(rng);
  return m;
}

// Brute-force PRDC straight from the definitions, with full distance
// matrices and sorted neighbour lists.
PRDC brute_prdc(const Matrix& real, const Matrix& fake, std::size_t k) {
  auto dist = [](const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
    return euclidean(a.row(i), b.row(j), a.cols);
  };
  auto radii = [&](const Matrix& m) {
    std::vector<double> r(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < m.rows; ++j) {
        if (i != j) d.push_back(dist(m, i, m, j));
      }
      std::sort(d.begin(), d.end());
      r[i] = d[k - 1];
    }
    return r;
  };
  const auto rr = radii(real), rf = radii(fake);
  double precision = 0, recall = 0, density = 0, coverage = 0;
  for (std::size_t j = 0; j < fake.rows; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < real.rows; ++i) {
      if (dist(real, i, fake, j) < rr[i]) {
        any = true;
        density += 1;
      }
    }
    precision += any;
  }
  for (std::size_t i = 0; i < real.rows; ++i) {
    bool in_fake_ball = false, covered = false;
    for (std::size_t j = 0; j < fake.rows; ++j) {
      in_fake_ball = in_fake_ball || dist(real, i, fake, j) < rf[j];
      covered = covered || dist(real, i, fake, j) < rr[i];
    }
    recall += in_fake_ball;
    coverage += covered;
  }
  const double nr = static_cast<double>(real.rows), nf = static_cast<double>(fake.rows);
  return {precision / nf, recall / nr, density / (static_cast<double>(k) * nf), coverage / nr};
}

PatientRecord ts_patient(const std::vector<std::pair<double, double>>& hr_points) {
  PatientRecord p;
  p.patient_id = "ts";
  p.covariates = {40.0, "M"};
  Visit v;
  v.labels = {false, {false, false, false}};
  for (auto [t, x] : hr_points) v.series.points.push_back({t, {{"HR", x}}});
  p.visits.push_back(v);
  return p;
}

Cohort one_patient_cohort(const PatientRecord& p) {
  Cohort c;
  c.schema = ehrgen::testing::small_schema();
  c.patients = {p};
  c.splits = {Split::unassigned};
  return c;
}

sim::SimSpec label_spec(double signal, std::size_t patients, std::uint64_t seed) {
  auto s = sim::default_spec(patients, seed);
  for (auto& l : s.labels) {
    for (auto& w : l.variable_weights) w *= signal;
    l.age_weight *= signal;
    for (auto& cw : l.code_weights) cw.second *= signal;
  }
  return s;
}

}  // namespace

// ---- stats ----

TEST(Stats, PearsonBasics) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8}, c = {4, 3, 2, 1}, z = {0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(pearson(a, b).r, 1.0);
  EXPECT_DOUBLE_EQ(pearson(a, c).r, -1.0);
  EXPECT_EQ(pearson(a, a).r, 1.0);
  EXPECT_EQ(pearson(z, z).r, 1.0);
  const auto d = pearson(a, z);
  EXPECT_EQ(d.r, 0.0);
  EXPECT_TRUE(d.degenerate);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), PreconditionError);
}

TEST(Stats, AurocHandExample) {
  // Positives 0.8, 0.4; negatives 0.6, 0.2: 3 of 4 pairs ordered.
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, {true, true, false, false}), 0.75);
  // All scores tied.
  EXPECT_EQ(auroc(std::vector<double>{1, 1, 1}, {true, false, false}), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{1, 2}, {true, true}), PreconditionError);
}

TEST(Stats, AurocRankEqualsTrapezoid) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 499;
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 20) / 4.0;  // plenty of ties
      y[i] = rng() % 3 == 0;
    }
    y[0] = true;
    y[1] = false;
    EXPECT_NEAR(auroc(s, y), trapezoid_area(roc_curve(s, y)), 1e-12);
  }
}

TEST(Stats, Wasserstein) {
  EXPECT_EQ(wasserstein1({1, 2, 3}, {3, 2, 1}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein1({0}, {1}), 1.0);
  EXPECT_DOUBLE_EQ(wasserstein1({0, 1}, {0}), 0.5);
  EXPECT_NEAR(wasserstein1({1, 2, 5}, {3, 4, 7}), 2.0, 1e-12);
  EXPECT_THROW(wasserstein1({}, {1}), PreconditionError);
}

// ---- n-grams ----

TEST(NGram, TableCountsPerPatient) {
  const auto c = code_cohort(4, {{{0, 1, 2}, {3}}, {{0, 1}}});
  const auto uni = ngram_table(c, NGramKind::unigram);
  EXPECT_DOUBLE_EQ(uni.at({"c0"}), 1.0);
  EXPECT_DOUBLE_EQ(uni.at({"c3"}), 0.5);
  const auto bi = ngram_table(c, NGramKind::bigram);
  EXPECT_DOUBLE_EQ(bi.at({"c0", "c1"}), 1.0);
  EXPECT_DOUBLE_EQ(bi.at({"c1", "c2"}), 0.5);
  EXPECT_EQ(bi.size(), 2u);
  const auto tri = ngram_table(c, NGramKind::trigram);
  EXPECT_EQ(tri.size(), 1u);
  const auto seq = ngram_table(c, NGramKind::sequential_bigram);
  EXPECT_EQ(seq.size(), 3u);
  EXPECT_DOUBLE_EQ(seq.at({"c2", "c3"}), 0.5);
}

TEST(NGram, SelfCorrelationIsOne) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c = random_code_cohort(60, 8, s);
    const auto f = ngram_fidelity(c, c);
    EXPECT_EQ(f.unigram.r, 1.0);
    EXPECT_EQ(f.bigram.r, 1.0);
    EXPECT_EQ(f.trigram.r, 1.0);
    EXPECT_EQ(f.sequential_bigram.r, 1.0);
  }
}

TEST(NGram, ShuffledWithinVisitOrder) {
  const auto c = random_code_cohort(200, 6, 3);
  Cohort shuffled = c;
  std::mt19937_64 rng(8);
  for (auto& p : shuffled.patients) {
    for (auto& v : p.visits) std::shuffle(v.events.begin(), v.events.end(), rng);
  }
  // Brute-force oracle: unigram tables agree, trigram tables do not.
  EXPECT_EQ(brute_ngrams(c, 1), brute_ngrams(shuffled, 1));
  EXPECT_NE(brute_ngrams(c, 3), brute_ngrams(shuffled, 3));
  const auto f = ngram_fidelity(c, shuffled);
  EXPECT_EQ(f.unigram.r, 1.0);
  EXPECT_LT(f.trigram.r, 1.0);
}

TEST(NGram, TopSelectionMatchesBruteForce) {
  const auto a = random_code_cohort(300, 10, 21), b = random_code_cohort(300, 10, 22);
  const auto ta = brute_ngrams(a, 2), tb = brute_ngrams(b, 2);
  std::vector<std::pair<std::string, double>> ranked(ta.begin(), ta.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](auto& x, auto& y) { return x.second > y.second; });
  ranked.resize(25);
  std::vector<double> x, y;
  for (auto& [k, v] : ranked) {
    x.push_back(v);
    y.push_back(tb.count(k) ? tb.at(k) : 0.0);
  }
  const auto r = ngram_correlation(ngram_table(a, NGramKind::bigram), ngram_table(b, NGramKind::bigram), 25);
  EXPECT_NEAR(r.r, pearson(x, y).r, 1e-12);
}

TEST(NGram, DisjointCodesAreDegenerate) {
  const auto a = code_cohort(4, {{{0, 1}}, {{0}}});
  const auto b = code_cohort(4, {{{2, 3}}, {{3}}});
  const auto r = ngram_correlation(ngram_table(a, NGramKind::unigram), ngram_table(b, NGramKind::unigram));
  EXPECT_EQ(r.r, 0.0);
  EXPECT_TRUE(r.degenerate);
}

TEST(NGram, TooFewDistinctThrows) {
  const auto a = code_cohort(4, {{{0}}, {{0}}});
  EXPECT_THROW(ngram_fidelity(a, a), PreconditionError);
}

// ---- embeddings ----

TEST(Embedding, SingleObservation) {
  const auto m = ts_embed(one_patient_cohort(ts_patient({{1.0, 80.0}})));
  ASSERT_EQ(m.cols, 15u);
  EXPECT_EQ(m(0, 0), 80.0);
  EXPECT_EQ(m(0, 1), 80.0);
  EXPECT_EQ(m(0, 2), 80.0);
  EXPECT_EQ(m(0, 3), 0.0);
  EXPECT_EQ(m(0, 12), 1.0);
  EXPECT_EQ(m(0, 13), 0.0);
}

TEST(Embedding, PopulationStdAndWindow) {
  const auto m = ts_embed(one_patient_cohort(ts_patient({{0.0, 70.0}, {47.5, 90.0}, {49.0, 500.0}})));
  EXPECT_EQ(m(0, 0), 70.0);
  EXPECT_EQ(m(0, 1), 90.0);
  EXPECT_EQ(m(0, 2), 80.0);
  EXPECT_EQ(m(0, 3), 10.0);
}

TEST(Embedding, MissingVariablesImputedFromReference) {
  Cohort ref;
  ref.schema = ehrgen::testing::small_schema();
  ref.patients = {ts_patient({{0.0, 60.0}}), ts_patient({{0.0, 70.0}, {1.0, 90.0}})};
  ref.splits.assign(2, Split::unassigned);
  const TSEmbedder e(ref);
  const auto empty = ts_patient({});
  const auto m = e.embed(one_patient_cohort(empty));
  EXPECT_DOUBLE_EQ(m(0, 0), 65.0);   // mean of mins 60, 70
  EXPECT_DOUBLE_EQ(m(0, 1), 75.0);   // mean of maxes 60, 90
  EXPECT_DOUBLE_EQ(m(0, 2), 70.0);   // mean of means 60, 80
  EXPECT_DOUBLE_EQ(m(0, 3), 5.0);    // mean of stds 0, 10
  for (std::size_t v = 0; v < 3; ++v) EXPECT_EQ(m(0, 12 + v), 0.0);
  EXPECT_EQ(m(0, 4), 0.0);  // LACT never observed anywhere
}

TEST(Embedding, CategoricalUsesLevelIndex) {
  auto p = ts_patient({});
  p.visits[0].series.points = {{0.0, {{"GCS", std::string("mild")}}}, {1.0, {{"GCS", std::string("severe")}}}};
  const auto m = ts_embed(one_patient_cohort(p));
  EXPECT_EQ(m(0, 8), 0.0);
  EXPECT_EQ(m(0, 9), 2.0);
  EXPECT_EQ(m(0, 14), 1.0);
}

// ---- PRDC ----

TEST(Prdc, SelfEvaluation) {
  std::mt19937_64 rng(1);
  const auto a = random_points(50, 3, rng);
  const auto r = prdc(a, a, 5);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.coverage, 1.0);
}

TEST(Prdc, FarAwayFakes) {
  std::mt19937_64 rng(2);
  const auto a = random_points(40, 2, rng), b = random_points(40, 2, rng, 100.0);
  const auto r = prdc(a, b, 5);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.density, 0.0);
  EXPECT_EQ(r.coverage, 0.0);
}

TEST(Prdc, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  {
    const auto a = random_points(20, 2, rng), b = random_points(20, 2, rng, 0.3);
    const auto got = prdc(a, b, 3), want = brute_prdc(a, b, 3);
    EXPECT_EQ(got.precision, want.precision);
    EXPECT_EQ(got.recall, want.recall);
    EXPECT_EQ(got.density, want.density);
    EXPECT_EQ(got.coverage, want.coverage);
  }
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 1 + rng() % 6;
    const auto a = random_points(k + 1 + rng() % 120, 1 + rng() % 5, rng);
    const auto b = random_points(k + 1 + rng() % 120, a.cols, rng, 0.5);
    const auto got = prdc(a, b, k), want = brute_prdc(a, b, k);
    EXPECT_EQ(got.precision, want.precision);
    EXPECT_EQ(got.recall, want.recall);
    EXPECT_EQ(got.density, want.density);
    EXPECT_EQ(got.coverage, want.coverage);
  }
}

TEST(Prdc, Preconditions) {
  Matrix same(10, 2, 1.0);
  std::mt19937_64 rng(4);
  EXPECT_THROW(prdc(same, random_points(10, 2, rng), 3), PreconditionError);
  EXPECT_THROW(prdc(random_points(3, 2, rng), random_points(10, 2, rng), 3), PreconditionError);
}

TEST(Prdc, StandardizerUsesReferenceStatistics) {
  Matrix ref(2, 2);
  ref.data = {0, 5, 2, 5};
  const auto z = Standardizer::fit(ref);
  const auto out = z.apply(ref);
  EXPECT_EQ(out(0, 0), -1.0);
  EXPECT_EQ(out(1, 0), 1.0);
  EXPECT_EQ(out(0, 1), 0.0);
}

// ---- correlation ----

TEST(Correlation, SelfAndNeverCoMeasured) {
  Cohort c = one_patient_cohort(ts_patient({}));
  auto& pts = c.patients[0].visits[0].series.points;
  for (int i = 0; i < 40; ++i) {
    pts.push_back({static_cast<double>(2 * i), {{"HR", 60.0 + i}, {"LACT", 1.0 + 0.1 * (i % 7)}}});
    pts.push_back({static_cast<double>(2 * i + 1), {{"GCS", std::string(i % 2 ? "mild" : "severe")}}});
  }
  const auto m = temporal_correlation(c);
  EXPECT_EQ(m.r(0, 0), 1.0);
  EXPECT_TRUE(m.defined[0][1]);
  EXPECT_EQ(m.support[0][1], 40u);
  EXPECT_FALSE(m.defined[0][2]);
  EXPECT_FALSE(m.defined[1][2]);
  EXPECT_EQ(m.support[1][2], 0u);
}

TEST(Correlation, MinimumSupport) {
  Cohort c = one_patient_cohort(ts_patient({}));
  for (int i = 0; i < 29; ++i) {
    c.patients[0].visits[0].series.points.push_back({static_cast<double>(i), {{"HR", 60.0 + i}, {"LACT", 1.0 + i}}});
  }
  EXPECT_FALSE(temporal_correlation(c).defined[0][1]);
  EXPECT_TRUE(temporal_correlation(c, 29).defined[0][1]);
  EXPECT_NEAR(temporal_correlation(c, 29).r(0, 1), 1.0, 1e-12);
}

TEST(Correlation, RecoversSimulatorCorrelation) {
  sim::SimSpec s;
  s.patients = 2000;
  s.seed = 5;
  sim::SimVariable a;
  a.name = "A";
  a.mean = 10.0;
  a.stddev = 2.0;
  a.decimals = -1;
  sim::SimVariable b = a;
  b.name = "B";
  s.variables = {a, b};
  s.correlation = {{1.0, 0.8}, {0.8, 1.0}};
  s.round_gap_hours = 1.0;
  s.codes_per_visit = 0.0;
  const auto m = temporal_correlation(sim::simulate(s));
  ASSERT_TRUE(m.defined[0][1]);
  EXPECT_NEAR(m.r(0, 1), 0.8, 0.1);
}

TEST(Correlation, MseAndConfusion) {
  CorrelationMatrix a;
  a.r = Matrix(4, 4);
  a.defined.assign(4, std::vector<bool>(4, true));
  for (std::size_t i = 0; i < 4; ++i) a.r(i, i) = 1.0;
  a.r(0, 1) = a.r(1, 0) = 0.1;
  a.r(2, 3) = a.r(3, 2) = -0.6;
  CorrelationMatrix b = a;
  EXPECT_EQ(mse_corr(a, b).value, 0.0);
  EXPECT_EQ(mse_corr(a, b).entries, 6u);
  auto conf = corr_confusion(a, b);
  std::size_t off = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) off += i == j ? 0 : conf[i][j];
  }
  EXPECT_EQ(off, 0u);
  EXPECT_EQ(conf[2][2], 5u);
  EXPECT_EQ(conf[0][0], 1u);
  EXPECT_EQ(diagonal_fraction(conf), 1.0);

  b.r(0, 1) = b.r(1, 0) = 0.6;
  EXPECT_NEAR(mse_corr(a, b).value, 0.25 / 6, 1e-15);
  b.defined[2][3] = b.defined[3][2] = false;
  EXPECT_EQ(mse_corr(a, b).entries, 5u);
}

TEST(Correlation, AllLowVersusAllHigh) {
  CorrelationMatrix a;
  a.r = Matrix(3, 3);
  a.defined.assign(3, std::vector<bool>(3, true));
  CorrelationMatrix b = a;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      a.r(i, j) = i == j ? 1.0 : 0.05;
      b.r(i, j) = i == j ? 1.0 : 0.9;
    }
  }
  const auto conf = corr_confusion(a, b);
  EXPECT_EQ(conf[2][4], 3u);
  EXPECT_EQ(diagonal_fraction(conf), 0.0);
}

TEST(Correlation, Levels) {
  EXPECT_EQ(correlation_level(-1.0), 0u);
  EXPECT_EQ(correlation_level(-0.5), 1u);
  EXPECT_EQ(correlation_level(-0.2), 2u);
  EXPECT_EQ(correlation_level(0.2), 3u);
  EXPECT_EQ(correlation_level(0.5), 4u);
  EXPECT_EQ(correlation_level(1.0), 4u);
}

TEST(CoOccurrence, ThreePointToy) {
  Cohort c = one_patient_cohort(ts_patient({}));
  c.patients[0].visits[0].series.points = {
      {0.0, {{"HR", 1.0}, {"LACT", 1.0}}},
      {1.0, {{"HR", 1.0}}},
      {2.0, {{"HR", 1.0}, {"LACT", 2.0}}},
  };
  const auto m = co_occurrence(c);
  EXPECT_DOUBLE_EQ(m(0, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m(1, 0), 1.0);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(2, 0), 0.0);  // GCS never observed
  EXPECT_EQ(m(0, 2), 0.0);
  EXPECT_EQ(frobenius_distance(m, m), 0.0);
}

// ---- boosting and utility ----

TEST(Boosting, LearnsThresholdAndInteraction) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix x(600, 3);
  std::vector<bool> y(600);
  for (std::size_t i = 0; i < 600; ++i) {
    for (std::size_t f = 0; f < 3; ++f) x(i, f) = u(rng);
    y[i] = (x(i, 0) > 0) != (x(i, 1) > 0);
  }
  GradientBoosting g;
  g.fit(x, y);
  EXPECT_EQ(g.trees(), 200u);
  EXPECT_GT(auroc(g.predict(x), y), 0.97);
  GradientBoosting h;
  h.fit(x, y);
  EXPECT_EQ(g.predict(x), h.predict(x));
  EXPECT_THROW(g.fit(x, std::vector<bool>(600, true)), PreconditionError);
}

TEST(Utility, IdenticalSyntheticMatchesRealBaseline) {
  const auto c = sim::simulate(sim::default_spec(600, 2));
  const auto test = sim::simulate(sim::default_spec(300, 3));
  UtilityConfig cfg;
  cfg.learner.rounds = 50;
  const auto r = utility_eval(c, test, c, cfg);
  ASSERT_EQ(r.rows.size(), 7u);
  EXPECT_EQ(r.rows[0].setting, "TRTR");
  EXPECT_EQ(r.rows[1].setting, "TSTR");
  EXPECT_EQ(r.rows[2].setting, "ratio=0");
  ASSERT_TRUE(r.rows[0].mortality && r.rows[1].mortality);
  EXPECT_NEAR(*r.rows[0].mortality, *r.rows[1].mortality, 0.02);
  EXPECT_EQ(r.rows[1].mortality, r.rows[2].mortality);
  EXPECT_EQ(r.rows[6].real_rows, 600u);
  EXPECT_EQ(r.rows[3].real_rows, 60u);
  EXPECT_EQ(r.rows[3].synthetic_rows, 600u);
}

TEST(Utility, NullLabelsGiveChance) {
  auto spec = label_spec(0.0, 2000, 7);
  auto test_spec = label_spec(0.0, 2000, 8);
  const auto r = utility_eval(sim::simulate(spec), sim::simulate(test_spec), sim::simulate(label_spec(0.0, 10, 9)));
  ASSERT_TRUE(r.rows[0].mortality);
  EXPECT_NEAR(*r.rows[0].mortality, 0.5, 0.03);
}

TEST(Utility, StrongSignalIsLearned) {
  const auto r = utility_eval(sim::simulate(label_spec(2.0, 2000, 7)), sim::simulate(label_spec(2.0, 1000, 8)),
                              sim::simulate(label_spec(2.0, 10, 9)));
  ASSERT_TRUE(r.rows[0].mortality);
  EXPECT_GT(*r.rows[0].mortality, 0.8);
}

TEST(Utility, RejectsEmptyTraining) {
  const auto c = sim::simulate(sim::default_spec(50, 2));
  Cohort empty = c.subset(Split::synthetic);
  UtilityConfig cfg;
  cfg.ratios = {0.0};
  EXPECT_THROW(utility_eval(c, c, empty, cfg), PreconditionError);
}

// ---- privacy ----

TEST(Privacy, GaussianJsd) {
  EXPECT_EQ(gaussian_jsd({0, 1}, {0, 1}).value, 0.0);
  EXPECT_GT(gaussian_jsd({0, 1}, {40, 1}).value, 0.999);
  // Independent fine-grid Simpson integration.
  const GaussianFit a{0, 1}, b{1, 2};
  auto pdf = [](double x, GaussianFit g) {
    return std::exp(-0.5 * std::pow((x - g.mean) / g.stddev, 2)) / (g.stddev * std::sqrt(2 * M_PI));
  };
  const int n = 200000;
  const double lo = -30, hi = 30, h = (hi - lo) / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i, p = pdf(x, a), q = pdf(x, b), m = (p + q) / 2;
    double f = 0;
    if (p > 0) f += 0.5 * p * std::log2(p / m);
    if (q > 0) f += 0.5 * q * std::log2(q / m);
    s += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  EXPECT_NEAR(gaussian_jsd(a, b).value, s * h / 3, 1e-6);
  EXPECT_TRUE(gaussian_jsd({1, 0}, {1, 0}).degenerate);
  EXPECT_EQ(gaussian_jsd({1, 0}, {1, 0}).value, 0.0);
  EXPECT_EQ(gaussian_jsd({1, 0}, {2, 1}).value, 1.0);
}

TEST(Privacy, SameCohortTwiceIsNeutral) {
  const auto train = sim::simulate(sim::default_spec(200, 1));
  const auto synth = sim::simulate(sim::default_spec(200, 2));
  const auto r = mia_privacy(train, train, synth);
  for (const auto* a : {&r.codes, &r.embedding}) {
    EXPECT_EQ(a->wasserstein, 0.0);
    EXPECT_EQ(a->jsd.value, 0.0);
    EXPECT_EQ(a->auroc, 0.5);
  }
}

TEST(Privacy, CopyOfTrainLeaks) {
  const auto train = sim::simulate(sim::default_spec(300, 1));
  const auto test = sim::simulate(sim::default_spec(300, 2));
  const auto r = mia_privacy(train, test, train);
  EXPECT_GT(r.embedding.auroc, 0.9);
  EXPECT_EQ(r.embedding.member.mean, 0.0);
  EXPECT_EQ(r.codes.member.mean, 0.0);
}

TEST(Privacy, IndependentSyntheticIsChance) {
  const auto train = sim::simulate(sim::default_spec(400, 1));
  const auto test = sim::simulate(sim::default_spec(400, 2));
  const auto synth = sim::simulate(sim::default_spec(400, 3));
  const auto r = mia_privacy(train, test, synth);
  EXPECT_NEAR(r.embedding.auroc, 0.5, 0.06);
  EXPECT_NEAR(r.codes.auroc, 0.5, 0.06);
}

TEST(Privacy, HammingOnCodePresence) {
  const auto a = code_cohort(4, {{{0, 1}, {1}}, {{3}}});
  const auto m = code_presence(a);
  EXPECT_EQ(m.data, (std::vector<double>{1, 1, 0, 0, 0, 0, 0, 1}));
  const auto d = nearest_hamming(m, code_presence(code_cohort(4, {{{0}}})));
  EXPECT_EQ(d, (std::vector<double>{1, 2}));
}

// ---- report ----

TEST(Report, DeterministicAndComplete) {
  const auto train = sim::simulate(sim::default_spec(150, 1));
  const auto test = sim::simulate(sim::default_spec(80, 2));
  EvaluationConfig cfg;
  cfg.utility_config.learner.rounds = 20;
  const auto a = evaluate(train, test, test, cfg, {{"seed", 1}});
  const auto b = evaluate(train, test, test, cfg, {{"seed", 1}});
  EXPECT_EQ(a.json.dump(), b.json.dump());
  const auto& j = a.json;
  EXPECT_TRUE(j["fidelity"]["ngram"].contains("unigram"));
  EXPECT_TRUE(j["fidelity"]["prdc"].contains("precision"));
  EXPECT_EQ(j["utility"].size(), 7u);
  EXPECT_TRUE(j["privacy"].contains("hamming"));
  EXPECT_EQ(j["provenance"]["cohorts"]["train"]["sha256"].get<std::string>().size(), 64u);
  // Confusion rows sum to the jointly defined pairs.
  std::size_t total = 0;
  for (const auto& row : j["fidelity"]["temporal_correlation"]["confusion"]) {
    for (const auto& v : row) total += v.get<std::size_t>();
  }
  EXPECT_EQ(total, j["fidelity"]["temporal_correlation"]["entries"].get<std::size_t>());
}

TEST(Report, OrderInvariant) {
  auto train = sim::simulate(sim::default_spec(120, 1));
  const auto test = sim::simulate(sim::default_spec(60, 2));
  EvaluationConfig cfg;
  cfg.utility = false;
  const auto a = evaluate(train, test, test, cfg);
  std::reverse(train.patients.begin(), train.patients.end());
  const auto b = evaluate(train, test, test, cfg);
  auto strip = [](nlohmann::json j) {
    j.erase("provenance");
    return j;
  };
  const auto ja = strip(a.json), jb = strip(b.json);
  EXPECT_NEAR(ja["fidelity"]["prdc"]["precision"].get<double>(), jb["fidelity"]["prdc"]["precision"].get<double>(),
              1e-12);
  EXPECT_NEAR(ja["fidelity"]["ngram"]["bigram"]["r"].get<double>(), jb["fidelity"]["ngram"]["bigram"]["r"].get<double>(),
              1e-12);
  EXPECT_NEAR(ja["privacy"]["euclidean"]["auroc"].get<double>(), jb["privacy"]["euclidean"]["auroc"].get<double>(),
              1e-12);
}

TEST(Report, CsvLayout) {
  Matrix m(2, 2);
  m.data = {1, 0.5, std::nan(""), 2};
  EXPECT_EQ(matrix_csv(m, {"a", "b"}, {"a", "b"}), ",a,b\na,1,0.5\nb,,2\n");
}
