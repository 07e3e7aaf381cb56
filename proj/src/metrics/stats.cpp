#include "ehrgen/metrics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

Pearson pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("pearson: size mismatch");
  if (x.size() < 2) throw PreconditionError("pearson: need at least 2 entries");
  if (std::equal(x.begin(), x.end(), y.begin())) return {1.0, false};
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0 || syy <= 0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

namespace {

void check_scores(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw PreconditionError("auroc: size mismatch");
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (pos == 0 || pos == positive.size()) throw PreconditionError("auroc: need both classes");
  for (double s : scores) {
    if (std::isnan(s)) throw PreconditionError("auroc: NaN score");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace

double auroc(std::span<const double> scores, const std::vector<bool>& positive) {
  check_scores(scores, positive);
  const auto idx = order_by_score(scores);
  // Ranks are 1-based; doubling keeps midranks integral.
  double twice_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double twice_mid = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[idx[k]]) {
        twice_rank_sum += twice_mid;
        ++n_pos;
      }
    }
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double q = static_cast<double>(idx.size() - n_pos);
  const double u = (twice_rank_sum - p * (p + 1)) / 2;
  return u / (p * q);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive) {
  check_scores(scores, positive);
  auto idx = order_by_score(scores);
  std::reverse(idx.begin(), idx.end());
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const double n_neg = static_cast<double>(positive.size()) - n_pos;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    for (; j < idx.size() && scores[idx[j]] == scores[idx[i]]; ++j) (positive[idx[j]] ? tp : fp) += 1;
    curve.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2;
  }
  return area;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double x = std::min(a[0], b[0]);
  double total = 0;
  while (i < a.size() || j < b.size()) {
    const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return total;
}

}  // namespace ehrgen::metrics
