#include "ehrgen/metrics/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ehrgen/metrics/prdc.hpp"
#include "ehrgen/metrics/stats.hpp"
#include "ehrgen/metrics/ts_embedding.hpp"
#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

namespace {

constexpr double kPi = 3.14159265358979323846;

double normal_pdf(double x, const GaussianFit& g) {
  const double z = (x - g.mean) / g.stddev;
  return std::exp(-0.5 * z * z) / (g.stddev * std::sqrt(2 * kPi));
}

double xlog2(double p, double q) {
  return p > 0 && q > 0 ? p * std::log2(p / q) : 0.0;
}

}  // namespace

GaussianFit fit_gaussian(const std::vector<double>& x) {
  if (x.empty()) throw PreconditionError("gaussian fit: empty sample");
  double sum = 0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0};
}

Jsd gaussian_jsd(const GaussianFit& a, const GaussianFit& b) {
  if (!(a.stddev > 0) || !(b.stddev > 0)) {
    const bool same = a.stddev == b.stddev && a.mean == b.mean;
    return {same ? 0.0 : 1.0, true};
  }
  const double lo = std::min(a.mean - 6 * a.stddev, b.mean - 6 * b.stddev);
  const double hi = std::max(a.mean + 6 * a.stddev, b.mean + 6 * b.stddev);
  const double step = (hi - lo) / static_cast<double>(kJsdGridPoints - 1);
  double total = 0;
  for (std::size_t i = 0; i < kJsdGridPoints; ++i) {
    const double x = lo + step * static_cast<double>(i);
    const double p = normal_pdf(x, a), q = normal_pdf(x, b), m = (p + q) / 2;
    const double f = 0.5 * xlog2(p, m) + 0.5 * xlog2(q, m);
    total += (i == 0 || i + 1 == kJsdGridPoints) ? f / 2 : f;
  }
  return {std::clamp(total * step, 0.0, 1.0), false};
}

AttackResult distance_attack(const std::string& name, const std::vector<double>& member,
                             const std::vector<double>& non_member) {
  AttackResult r;
  r.distance = name;
  r.wasserstein = wasserstein1(member, non_member);
  r.member = fit_gaussian(member);
  r.non_member = fit_gaussian(non_member);
  r.jsd = gaussian_jsd(r.member, r.non_member);
  std::vector<double> scores;
  std::vector<bool> is_member;
  for (double d : member) {
    scores.push_back(-d);
    is_member.push_back(true);
  }
  for (double d : non_member) {
    scores.push_back(-d);
    is_member.push_back(false);
  }
  r.auroc = auroc(scores, is_member);
  return r;
}

Matrix code_presence(const Cohort& cohort) {
  const auto& schema = cohort.schema;
  Matrix m(cohort.size(), schema.codes().size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (const auto& v : cohort.patients[i].visits) {
      for (const auto& e : v.events) {
        const auto idx = schema.code_index(e.code);
        if (!idx) throw PreconditionError("code presence: unknown code " + e.code);
        m(i, *idx) = 1.0;
      }
    }
  }
  return m;
}

std::vector<double> nearest_hamming(const Matrix& queries, const Matrix& reference) {
  if (queries.cols != reference.cols) throw PreconditionError("hamming: width mismatch");
  if (reference.rows == 0) throw PreconditionError("hamming: empty reference");
  std::vector<double> out(queries.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j < reference.rows && best > 0; ++j) {
      std::size_t d = 0;
      for (std::size_t c = 0; c < queries.cols; ++c) d += queries(i, c) != reference(j, c);
      best = std::min(best, d);
    }
    out[i] = static_cast<double>(best);
  }
  return out;
}

std::vector<double> nearest_euclidean(const Matrix& queries, const Matrix& reference) {
  if (queries.cols != reference.cols) throw PreconditionError("euclidean: width mismatch");
  if (reference.rows == 0) throw PreconditionError("euclidean: empty reference");
  std::vector<double> out(queries.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < reference.rows; ++j) {
      best = std::min(best, euclidean(queries.row(i), reference.row(j), queries.cols));
    }
    out[i] = best;
  }
  return out;
}

MiaResult mia_privacy(const Cohort& train, const Cohort& test, const Cohort& synth) {
  if (train.size() == 0 || test.size() == 0 || synth.size() == 0) {
    throw PreconditionError("mia: train, test and synthetic cohorts must be non-empty");
  }
  MiaResult r;
  const Matrix synth_codes = code_presence(synth);
  r.codes = distance_attack("hamming", nearest_hamming(code_presence(train), synth_codes),
                            nearest_hamming(code_presence(test), synth_codes));

  const TSEmbedder embedder(train);
  const Matrix train_emb = embedder.embed(train);
  const auto z = Standardizer::fit(train_emb);
  const Matrix synth_emb = z.apply(embedder.embed(synth));
  r.embedding = distance_attack("euclidean", nearest_euclidean(z.apply(train_emb), synth_emb),
                                nearest_euclidean(z.apply(embedder.embed(test)), synth_emb));
  return r;
}

nlohmann::json AttackResult::to_json() const {
  return {{"distance", distance},
          {"wasserstein", wasserstein},
          {"jsd", jsd.value},
          {"jsd_degenerate", jsd.degenerate},
          {"auroc", auroc},
          {"member_mean", member.mean},
          {"member_std", member.stddev},
          {"non_member_mean", non_member.mean},
          {"non_member_std", non_member.stddev}};
}

nlohmann::json MiaResult::to_json() const {
  return {{"hamming", codes.to_json()}, {"euclidean", embedding.to_json()}};
}

}  // namespace ehrgen::metrics
