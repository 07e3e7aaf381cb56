#include "ehrgen/metrics/correlation.hpp"

#include <algorithm>
#include <cmath>

#include "ehrgen/metrics/ts_embedding.hpp"
#include "ehrgen/util/error.hpp"

namespace ehrgen::metrics {

namespace {

// Calls f(values, present) once per time point with the point's values in
// variable order.
template <class F>
void for_each_point(const Cohort& cohort, F&& f) {
  const auto& schema = cohort.schema;
  const std::size_t nv = schema.variables().size();
  std::vector<double> values(nv);
  std::vector<bool> present(nv);
  for (const auto& p : cohort.patients) {
    for (const auto& v : p.visits) {
      for (const auto& point : v.series.points) {
        std::fill(present.begin(), present.end(), false);
        for (const auto& o : point.observations) {
          const auto idx = schema.variable_index(o.variable);
          if (!idx) throw PreconditionError("correlation: unknown variable " + o.variable);
          values[*idx] = observation_value(schema, *idx, o.value);
          present[*idx] = true;
        }
        f(values, present);
      }
    }
  }
}

}  // namespace

CorrelationMatrix temporal_correlation(const Cohort& cohort, std::size_t min_support) {
  const std::size_t nv = cohort.schema.variables().size();
  // Two passes per pair keep the pooled moments numerically stable.
  std::vector<double> n(nv * nv, 0), sx(nv * nv, 0), sy(nv * nv, 0);
  for_each_point(cohort, [&](const std::vector<double>& x, const std::vector<bool>& has) {
    for (std::size_t a = 0; a < nv; ++a) {
      if (!has[a]) continue;
      for (std::size_t b = a + 1; b < nv; ++b) {
        if (!has[b]) continue;
        n[a * nv + b] += 1;
        sx[a * nv + b] += x[a];
        sy[a * nv + b] += x[b];
      }
    }
  });
  std::vector<double> sxx(nv * nv, 0), syy(nv * nv, 0), sxy(nv * nv, 0);
  for_each_point(cohort, [&](const std::vector<double>& x, const std::vector<bool>& has) {
    for (std::size_t a = 0; a < nv; ++a) {
      if (!has[a]) continue;
      for (std::size_t b = a + 1; b < nv; ++b) {
        if (!has[b]) continue;
        const std::size_t k = a * nv + b;
        const double dx = x[a] - sx[k] / n[k], dy = x[b] - sy[k] / n[k];
        sxx[k] += dx * dx;
        syy[k] += dy * dy;
        sxy[k] += dx * dy;
      }
    }
  });

  CorrelationMatrix out;
  out.r = Matrix(nv, nv);
  out.defined.assign(nv, std::vector<bool>(nv, false));
  out.support.assign(nv, std::vector<std::size_t>(nv, 0));
  for (std::size_t a = 0; a < nv; ++a) {
    out.r(a, a) = 1.0;
    out.defined[a][a] = true;
    for (std::size_t b = a + 1; b < nv; ++b) {
      const std::size_t k = a * nv + b;
      const auto count = static_cast<std::size_t>(n[k]);
      out.support[a][b] = out.support[b][a] = count;
      if (count < min_support || sxx[k] <= 0 || syy[k] <= 0) continue;
      const double r = std::clamp(sxy[k] / std::sqrt(sxx[k] * syy[k]), -1.0, 1.0);
      out.r(a, b) = out.r(b, a) = r;
      out.defined[a][b] = out.defined[b][a] = true;
    }
  }
  return out;
}

MseCorr mse_corr(const CorrelationMatrix& real, const CorrelationMatrix& synth) {
  if (real.r.rows != synth.r.rows) throw PreconditionError("mse_corr: size mismatch");
  MseCorr out;
  double sum = 0;
  for (std::size_t a = 0; a < real.r.rows; ++a) {
    for (std::size_t b = a + 1; b < real.r.rows; ++b) {
      if (!real.defined[a][b] || !synth.defined[a][b]) continue;
      const double d = real.r(a, b) - synth.r(a, b);
      sum += d * d;
      ++out.entries;
    }
  }
  if (out.entries > 0) out.value = sum / static_cast<double>(out.entries);
  return out;
}

std::size_t correlation_level(double r) {
  if (r < -0.5) return 0;
  if (r < -0.2) return 1;
  if (r < 0.2) return 2;
  if (r < 0.5) return 3;
  return 4;
}

Confusion corr_confusion(const CorrelationMatrix& real, const CorrelationMatrix& synth) {
  if (real.r.rows != synth.r.rows) throw PreconditionError("corr_confusion: size mismatch");
  Confusion c{};
  for (std::size_t a = 0; a < real.r.rows; ++a) {
    for (std::size_t b = a + 1; b < real.r.rows; ++b) {
      if (!real.defined[a][b] || !synth.defined[a][b]) continue;
      ++c[correlation_level(real.r(a, b))][correlation_level(synth.r(a, b))];
    }
  }
  return c;
}

double diagonal_fraction(const Confusion& c) {
  std::size_t diag = 0, total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    diag += c[i][i];
    for (std::size_t j = 0; j < 5; ++j) total += c[i][j];
  }
  return total == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(total);
}

Matrix co_occurrence(const Cohort& cohort) {
  const std::size_t nv = cohort.schema.variables().size();
  Matrix counts(nv, nv);
  for_each_point(cohort, [&](const std::vector<double>&, const std::vector<bool>& has) {
    for (std::size_t a = 0; a < nv; ++a) {
      if (!has[a]) continue;
      for (std::size_t b = 0; b < nv; ++b) {
        if (has[b]) counts(a, b) += 1;
      }
    }
  });
  Matrix m(nv, nv);
  for (std::size_t a = 0; a < nv; ++a) {
    const double occ = counts(a, a);
    if (occ == 0) continue;
    for (std::size_t b = 0; b < nv; ++b) m(a, b) = counts(a, b) / occ;
  }
  return m;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw PreconditionError("frobenius: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return std::sqrt(s);
}

}  // namespace ehrgen::metrics
