#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ehrgen/lm/network.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen::gen {

struct SamplingConfig {
  double temperature = 0.7;
  std::size_t top_k = 50;
  bool greedy = false;  // argmax; the temperature -> 0 limit
};

// Throws PreconditionError unless temperature > 0 and top_k >= 1.
void check_sampling(const SamplingConfig& config);

// The distribution sample_token draws from: logits / temperature, keep the
// top_k largest (ties go to the lower id), softmax over the kept entries.
// Greedy mode puts all mass on the argmax (lowest id among ties).
std::vector<double> sampling_distribution(std::span<const float> logits, const SamplingConfig& config);

lm::Token sample_token(std::span<const float> logits, const SamplingConfig& config, Rng& rng);

}  // namespace ehrgen::gen
