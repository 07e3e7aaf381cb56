#include "ehrgen/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ehrgen/util/random.hpp"

namespace ehrgen::sim {
namespace {

double inclusion_probability(double base, double weight, double z) {
  if (base <= 0.0) return 0.0;
  if (base >= 1.0) return 1.0;
  const double logit = std::log(base / (1.0 - base)) + weight * z;
  return 1.0 / (1.0 + std::exp(-logit));
}

double round_to(double x, int decimals) {
  if (decimals < 0) return x;
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

std::size_t draw_index(const std::vector<double>& cumulative, double u) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

std::vector<double> cumsum(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

struct Prepared {
  std::vector<std::vector<double>> chol;
  std::vector<std::vector<double>> transition_cdf;
  std::vector<double> initial_cdf;
  std::vector<double> gender_cdf;
  std::vector<std::vector<std::pair<std::size_t, double>>> label_code_weights;
  std::size_t grid_points = 0;
};

PatientRecord simulate_patient(const SimSpec& s, const Prepared& prep, std::size_t index) {
  Rng rng = make_rng(s.seed, 1, index);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t nv = s.variables.size();

  PatientRecord p;
  p.patient_id = "p" + std::to_string(index);
  p.covariates.age = s.age_min + (s.age_max - s.age_min) * uniform01(rng);
  p.covariates.gender = s.genders[draw_index(prep.gender_cdf, uniform01(rng))];

  std::size_t n_visits = 1;
  while (n_visits < s.max_visits && uniform01(rng) >= s.visit_p) ++n_visits;

  std::size_t code_state = prep.initial_cdf.empty() ? 0 : draw_index(prep.initial_cdf, uniform01(rng));
  const double age_mid = 0.5 * (s.age_min + s.age_max);
  const double age_half = std::max(1e-9, 0.5 * (s.age_max - s.age_min));

  std::vector<double> u(nv), z(nv);
  std::vector<std::vector<double>> zgrid(prep.grid_points, std::vector<double>(nv));
  for (std::size_t vi = 0; vi < n_visits; ++vi) {
    Visit visit;
    // Latent factors: stationary AR(1) per factor, mixed by the Cholesky factor.
    for (std::size_t g = 0; g < prep.grid_points; ++g) {
      for (std::size_t k = 0; k < nv; ++k) {
        const double phi = s.variables[k].ar_coef;
        u[k] = g == 0 ? normal(rng) : phi * u[k] + std::sqrt(1.0 - phi * phi) * normal(rng);
      }
      for (std::size_t k = 0; k < nv; ++k) {
        double acc = 0.0;
        for (std::size_t m = 0; m <= k; ++m) acc += prep.chol[k][m] * u[m];
        zgrid[g][k] = acc;
      }
    }

    std::exponential_distribution<double> gap(1.0 / s.round_gap_hours);
    for (double t = gap(rng); t < s.visit_hours; t += gap(rng)) {
      const auto g = std::min(prep.grid_points - 1, static_cast<std::size_t>(t / s.grid_hours));
      TimePoint pt;
      pt.t = t;
      for (std::size_t k = 0; k < nv; ++k) {
        const SimVariable& var = s.variables[k];
        const double zk = zgrid[g][k];
        if (uniform01(rng) >= inclusion_probability(var.obs_prob, var.missing_weight, zk)) continue;
        if (var.kind == VariableKind::numeric) {
          pt.observations.push_back({var.name, round_to(var.mean + var.stddev * zk, var.decimals)});
        } else {
          const auto level = static_cast<std::size_t>(
              std::count_if(var.cutpoints.begin(), var.cutpoints.end(), [&](double c) { return c < zk; }));
          pt.observations.push_back({var.name, var.categories[level]});
        }
      }
      if (!pt.observations.empty()) visit.series.points.push_back(std::move(pt));
    }

    std::set<std::size_t> present;
    if (!s.codes.empty() && s.codes_per_visit > 0.0) {
      const int n_codes = std::poisson_distribution<int>(s.codes_per_visit)(rng);
      for (int c = 0; c < n_codes; ++c) {
        code_state = draw_index(prep.transition_cdf[code_state], uniform01(rng));
        visit.events.push_back({s.codes[code_state]});
        present.insert(code_state);
      }
    }

    std::vector<double> zmean(nv, 0.0);
    for (const auto& row : zgrid) {
      for (std::size_t k = 0; k < nv; ++k) zmean[k] += row[k];
    }
    for (double& m : zmean) m /= static_cast<double>(prep.grid_points);
    const double age_std = (p.covariates.age - age_mid) / age_half;

    std::vector<bool> flags(s.labels.size());
    for (std::size_t l = 0; l < s.labels.size(); ++l) {
      const LabelModel& lm = s.labels[l];
      double logit = lm.bias + lm.age_weight * age_std;
      for (std::size_t k = 0; k < lm.variable_weights.size(); ++k) logit += lm.variable_weights[k] * zmean[k];
      for (const auto& [code, w] : prep.label_code_weights[l]) {
        if (present.count(code)) logit += w;
      }
      flags[l] = uniform01(rng) < 1.0 / (1.0 + std::exp(-logit));
    }
    visit.labels.mortality = flags[0];
    visit.labels.phenotypes.assign(flags.begin() + 1, flags.end());
    p.visits.push_back(std::move(visit));
  }
  return p;
}

}  // namespace

Cohort simulate(const SimSpec& spec) {
  check_spec(spec);
  const std::size_t nv = spec.variables.size();
  Prepared prep;
  if (spec.correlation.empty()) {
    prep.chol.assign(nv, std::vector<double>(nv, 0.0));
    for (std::size_t k = 0; k < nv; ++k) prep.chol[k][k] = 1.0;
  } else {
    prep.chol = psd_cholesky(spec.correlation);
  }
  const std::size_t nc = spec.codes.size();
  if (nc > 0) {
    auto transition = spec.transition;
    if (transition.empty()) transition.assign(nc, std::vector<double>(nc, 1.0 / static_cast<double>(nc)));
    for (const auto& row : transition) prep.transition_cdf.push_back(cumsum(row));
    prep.initial_cdf = cumsum(stationary_distribution(transition));
  }
  prep.gender_cdf = cumsum(spec.gender_probs);
  for (const auto& l : spec.labels) {
    std::vector<std::pair<std::size_t, double>> weights;
    for (const auto& [code, w] : l.code_weights) {
      weights.emplace_back(static_cast<std::size_t>(std::find(spec.codes.begin(), spec.codes.end(), code) -
                                                    spec.codes.begin()),
                           w);
    }
    prep.label_code_weights.push_back(std::move(weights));
  }
  prep.grid_points = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.visit_hours / spec.grid_hours)));

  Cohort cohort;
  cohort.schema = schema_for(spec);
  cohort.patients.reserve(spec.patients);
  for (std::size_t i = 0; i < spec.patients; ++i) {
    cohort.patients.push_back(simulate_patient(spec, prep, i));
  }
  cohort.splits.assign(spec.patients, Split::unassigned);
  return cohort;
}

}  // namespace ehrgen::sim
