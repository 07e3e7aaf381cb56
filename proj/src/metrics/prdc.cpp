#include "ehrgen/metrics/prdc.hpp"

#include <algorithm>
#include <cmath>

#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

Standardizer Standardizer::fit(const Matrix& reference) {
  Standardizer s;
  s.mean.assign(reference.cols, 0.0);
  s.scale.assign(reference.cols, 1.0);
  if (reference.rows == 0) return s;
  const double n = static_cast<double>(reference.rows);
  for (std::size_t c = 0; c < reference.cols; ++c) {
    double sum = 0;
    for (std::size_t r = 0; r < reference.rows; ++r) sum += reference(r, c);
    const double mean = sum / n;
    double ss = 0;
    for (std::size_t r = 0; r < reference.rows; ++r) ss += (reference(r, c) - mean) * (reference(r, c) - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[c] = mean;
    if (sd > 0) s.scale[c] = sd;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& m) const {
  if (m.cols != mean.size()) throw PreconditionError("standardize: width mismatch");
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = (m(r, c) - mean[c]) / scale[c];
  }
  return out;
}

double euclidean(const double* a, const double* b, std::size_t dim) {
  double s = 0;
  for (std::size_t i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<double> kth_neighbour_distances(const Matrix& points, std::size_t k) {
  if (k == 0 || points.rows <= k) throw PreconditionError("prdc: need more than k points");
  std::vector<double> radii(points.rows);
  std::vector<double> d;
  for (std::size_t i = 0; i < points.rows; ++i) {
    d.clear();
    for (std::size_t j = 0; j < points.rows; ++j) {
      if (j != i) d.push_back(euclidean(points.row(i), points.row(j), points.cols));
    }
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    radii[i] = d[k - 1];
  }
  return radii;
}

PRDC prdc(const Matrix& real, const Matrix& fake, std::size_t k) {
  if (real.cols != fake.cols) throw PreconditionError("prdc: width mismatch");
  if (real.rows <= k || fake.rows <= k) throw PreconditionError("prdc: need more than k points per set");
  bool distinct = false;
  for (std::size_t r = 1; r < real.rows && !distinct; ++r) {
    distinct = !std::equal(real.row(r), real.row(r) + real.cols, real.row(0));
  }
  if (!distinct) throw PreconditionError("prdc: degenerate real embeddings (all identical)");

  const auto real_r = kth_neighbour_distances(real, k);
  const auto fake_r = kth_neighbour_distances(fake, k);
  std::vector<char> real_recalled(real.rows, 0), real_covered(real.rows, 0);
  std::size_t precise = 0, inside = 0;
  for (std::size_t j = 0; j < fake.rows; ++j) {
    std::size_t balls = 0;
    for (std::size_t i = 0; i < real.rows; ++i) {
      const double d = euclidean(real.row(i), fake.row(j), real.cols);
      if (d < real_r[i]) {
        ++balls;
        real_covered[i] = 1;
      }
      if (d < fake_r[j]) real_recalled[i] = 1;
    }
    inside += balls;
    if (balls > 0) ++precise;
  }
  const double nr = static_cast<double>(real.rows), nf = static_cast<double>(fake.rows);
  PRDC out;
  out.precision = static_cast<double>(precise) / nf;
  out.recall = static_cast<double>(std::count(real_recalled.begin(), real_recalled.end(), 1)) / nr;
  out.density = static_cast<double>(inside) / (static_cast<double>(k) * nf);
  out.coverage = static_cast<double>(std::count(real_covered.begin(), real_covered.end(), 1)) / nr;
  return out;
}

nlohmann::json PRDC::to_json() const {
  return {{"precision", precision}, {"recall", recall}, {"density", density}, {"coverage", coverage}};
}

}  // namespace ehrgen::metrics
