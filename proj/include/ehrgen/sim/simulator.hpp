#pragma once

#include <string>
#include <vector>

#include "ehrgen/core/record.hpp"
#include "ehrgen/sim/sim_spec.hpp"

namespace ehrgen::sim {

// Draws a cohort from `spec`. Patient i uses the stream
// derive_seed(spec.seed, 1, i), so the result is a pure function of the spec
// and patients can be generated in any order.
Cohort simulate(const SimSpec& spec);

struct VariableStats {
  std::string name;
  double mean = 0.0;    // marginal of the latent value
  double stddev = 0.0;
  double observation_rate = 0.0;   // P(included | measurement round)
  double observed_mean = 0.0;      // E[value | included]
  double observed_stddev = 0.0;
  double expected_gap_hours = 0.0; // mean time between this variable's observations
  std::vector<double> category_probs;  // categorical only
};

// Closed-form summary of what simulate(spec) converges to.
struct OracleStats {
  std::vector<VariableStats> variables;
  std::vector<std::vector<double>> correlation;  // latent correlation, all variables
  std::vector<double> code_frequencies;          // stationary distribution of the chain
  double expected_visits = 0.0;
  double expected_codes_per_visit = 0.0;
  double expected_rounds_per_visit = 0.0;
};

OracleStats theoretical_stats(const SimSpec& spec);

// Stationary distribution of a row-stochastic matrix (lazy power iteration).
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition);

}  // namespace ehrgen::sim
