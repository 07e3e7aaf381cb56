#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ehrgen/sim/simulator.hpp"

namespace ehrgen::sim {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// E[f(Z)] for Z ~ N(0, 1), trapezoid rule on [-12, 12]; the integrand is
// smooth and decays like the Gaussian, so 4801 nodes give ~1e-14 accuracy.
template <typename F>
double gaussian_expectation(F f) {
  constexpr int kNodes = 4801;
  constexpr double kLo = -12.0, kHi = 12.0;
  const double h = (kHi - kLo) / (kNodes - 1);
  double acc = 0.0;
  for (int i = 0; i < kNodes; ++i) {
    const double x = kLo + h * i;
    const double w = (i == 0 || i == kNodes - 1) ? 0.5 : 1.0;
    acc += w * f(x) * std::exp(-0.5 * x * x);
  }
  return acc * h / std::sqrt(2.0 * std::numbers::pi);
}

double inclusion(double base, double weight, double z) {
  if (base <= 0.0) return 0.0;
  if (base >= 1.0) return 1.0;
  return 1.0 / (1.0 + std::exp(-(std::log(base / (1.0 - base)) + weight * z)));
}

}  // namespace

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition) {
  const std::size_t n = transition.size();
  if (n == 0) return {};
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (int iter = 0; iter < 200000; ++iter) {
    // Lazy chain (P + I) / 2 has the same stationary law and is aperiodic.
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < n; ++j) next[j] += 0.5 * pi[i] * transition[i][j];
    }
    double diff = 0.0, total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      diff += std::abs(next[j] - pi[j]);
      total += next[j];
    }
    for (std::size_t j = 0; j < n; ++j) pi[j] = next[j] / total;
    if (diff < 1e-15) break;
  }
  return pi;
}

OracleStats theoretical_stats(const SimSpec& spec) {
  check_spec(spec);
  OracleStats out;
  const std::size_t nv = spec.variables.size();
  for (const auto& v : spec.variables) {
    VariableStats st;
    st.name = v.name;
    st.observation_rate = gaussian_expectation([&](double z) { return inclusion(v.obs_prob, v.missing_weight, z); });
    st.expected_gap_hours = st.observation_rate > 0.0 ? spec.round_gap_hours / st.observation_rate
                                                      : std::numeric_limits<double>::infinity();
    if (v.kind == VariableKind::numeric) {
      st.mean = v.mean;
      st.stddev = v.stddev;
      if (st.observation_rate > 0.0) {
        const double m1 = gaussian_expectation([&](double z) { return z * inclusion(v.obs_prob, v.missing_weight, z); }) /
                          st.observation_rate;
        const double m2 = gaussian_expectation([&](double z) { return z * z * inclusion(v.obs_prob, v.missing_weight, z); }) /
                          st.observation_rate;
        st.observed_mean = v.mean + v.stddev * m1;
        st.observed_stddev = v.stddev * std::sqrt(std::max(0.0, m2 - m1 * m1));
      }
    } else {
      double prev = 0.0;
      for (std::size_t c = 0; c < v.categories.size(); ++c) {
        const double cum = c < v.cutpoints.size() ? normal_cdf(v.cutpoints[c]) : 1.0;
        st.category_probs.push_back(cum - prev);
        prev = cum;
      }
    }
    out.variables.push_back(std::move(st));
  }
  out.correlation = spec.correlation;
  if (out.correlation.empty()) {
    out.correlation.assign(nv, std::vector<double>(nv, 0.0));
    for (std::size_t k = 0; k < nv; ++k) out.correlation[k][k] = 1.0;
  }
  const std::size_t nc = spec.codes.size();
  if (nc > 0) {
    auto transition = spec.transition;
    if (transition.empty()) transition.assign(nc, std::vector<double>(nc, 1.0 / static_cast<double>(nc)));
    out.code_frequencies = stationary_distribution(transition);
  }
  // Truncated geometric: P(n) = (1-p)^(n-1) p for n < max, remaining mass at max.
  double ev = 0.0, tail = 1.0;
  for (std::size_t n = 1; n < spec.max_visits; ++n) {
    ev += static_cast<double>(n) * tail * spec.visit_p;
    tail *= 1.0 - spec.visit_p;
  }
  ev += static_cast<double>(spec.max_visits) * tail;
  out.expected_visits = ev;
  out.expected_codes_per_visit = spec.codes.empty() ? 0.0 : spec.codes_per_visit;
  out.expected_rounds_per_visit = spec.visit_hours / spec.round_gap_hours;
  return out;
}

}  // namespace ehrgen::sim
