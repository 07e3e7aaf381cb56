#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/gen/sampler.hpp"
#include "ehrgen/lm/model.hpp"
#include "ehrgen/tok/codec.hpp"

namespace ehrgen::gen {

struct GenConfig {
  double temperature = 0.7;
  std::size_t top_k = 50;
  bool greedy = false;
  std::size_t max_tokens = 0;  // 0 means the model context
  std::size_t count = 0;       // patients to emit
  std::uint64_t seed = 0;
  std::size_t max_retries = 5;  // extra attempts per slot after a malformed sample
  tok::ValueMode value_mode = tok::ValueMode::uniform_sample;
  // Tokens fed after <s> before sampling starts. Empty for unconditional
  // generation.
  std::vector<tok::TokenId> prompt;

  SamplingConfig sampling() const { return {temperature, top_k, greedy}; }
};

// Throws PreconditionError on invalid sampling settings.
void check_gen_config(const GenConfig& config);

nlohmann::json to_json(const GenConfig& config);
GenConfig gen_config_from_json(const nlohmann::json& j);

struct SampledSequence {
  tok::TokenSequence tokens;
  bool truncated = false;  // stopped at max_tokens without </s>
};

// Starts from <s> (plus the prompt) and draws until </s> or max_tokens.
// Throws PreconditionError when the model and vocabulary sizes differ.
SampledSequence sample_sequence(const lm::Model& model, const tok::Vocabulary& vocab, const GenConfig& config,
                                std::uint64_t seed);

struct GenerationStats {
  std::size_t requested = 0;
  std::size_t emitted = 0;
  std::size_t attempts = 0;
  std::size_t malformed = 0;  // attempts discarded
  std::size_t truncated = 0;  // attempts that hit max_tokens
  std::size_t salvaged = 0;   // truncated attempts kept after dropping the open visit
  double malformed_rate = 0.0;
  double truncation_rate = 0.0;
  double mean_length = 0.0;  // tokens per emitted sequence

  nlohmann::json to_json() const;
};

struct GenerationResult {
  Cohort cohort;  // every patient tagged Split::synthetic
  std::vector<tok::TokenSequence> sequences;
  GenerationStats stats;
};

// Slot i draws with derive_seed(seed, i, attempt), so each patient is
// independent of the others. A malformed or schema-invalid sample is
// redrawn up to max_retries times; past that the call throws Error with the
// malformed rate so far.
GenerationResult generate_cohort(const lm::Model& model, const tok::Vocabulary& vocab, const GenConfig& config);

}  // namespace ehrgen::gen
