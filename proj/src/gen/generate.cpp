#include "ehrgen/gen/generate.hpp"

#include <algorithm>
#include <sstream>

#include "ehrgen/core/validate.hpp"
#include "ehrgen/lm/incremental.hpp"
#include "ehrgen/util/error.hpp"

namespace ehrgen::gen {

namespace {

constexpr std::uint64_t kSampleStream = 0x5A3F;
constexpr std::uint64_t kValueStream = 0x7A1E;

std::size_t sequence_limit(const lm::Model& model, const GenConfig& config) {
  const std::size_t context = model.config().context;
  return config.max_tokens == 0 ? context : std::min(config.max_tokens, context);
}

}  // namespace

void check_gen_config(const GenConfig& c) {
  check_sampling(c.sampling());
}

nlohmann::json to_json(const GenConfig& c) {
  return {{"temperature", c.temperature}, {"top_k", c.top_k},     {"greedy", c.greedy},
          {"max_tokens", c.max_tokens},   {"count", c.count},     {"seed", c.seed},
          {"max_retries", c.max_retries}, {"value_mode", tok::to_string(c.value_mode)},
          {"prompt", c.prompt}};
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  c.temperature = j.value("temperature", c.temperature);
  c.top_k = j.value("top_k", c.top_k);
  c.greedy = j.value("greedy", c.greedy);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.count = j.value("count", c.count);
  c.seed = j.value("seed", c.seed);
  c.max_retries = j.value("max_retries", c.max_retries);
  if (j.contains("value_mode")) c.value_mode = tok::value_mode_from_string(j.at("value_mode").get<std::string>());
  c.prompt = j.value("prompt", c.prompt);
  check_gen_config(c);
  return c;
}

SampledSequence sample_sequence(const lm::Model& model, const tok::Vocabulary& vocab, const GenConfig& config,
                                std::uint64_t seed) {
  check_gen_config(config);
  if (model.config().vocab_size != vocab.size()) {
    throw PreconditionError("generate: model vocabulary size " + std::to_string(model.config().vocab_size) +
                            " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  const std::size_t limit = sequence_limit(model, config);
  if (config.prompt.size() + 1 >= limit) throw PreconditionError("generate: prompt does not fit in max_tokens");

  const auto sampling = config.sampling();
  Rng rng(seed);
  lm::IncrementalDecoder decoder(model);
  SampledSequence out;
  auto& ids = out.tokens.ids;
  ids.push_back(vocab.bos());
  ids.insert(ids.end(), config.prompt.begin(), config.prompt.end());

  std::span<const float> logits;
  for (auto id : ids) logits = decoder.step(id);
  while (true) {
    const auto next = sample_token(logits, sampling, rng);
    ids.push_back(next);
    if (next == vocab.eos()) break;
    if (ids.size() >= limit) {
      out.truncated = true;
      break;
    }
    logits = decoder.step(next);
  }
  return out;
}

nlohmann::json GenerationStats::to_json() const {
  return {{"requested", requested},
          {"emitted", emitted},
          {"attempts", attempts},
          {"malformed", malformed},
          {"truncated", truncated},
          {"salvaged", salvaged},
          {"malformed_rate", malformed_rate},
          {"truncation_rate", truncation_rate},
          {"mean_length", mean_length}};
}

GenerationResult generate_cohort(const lm::Model& model, const tok::Vocabulary& vocab, const GenConfig& config) {
  check_gen_config(config);
  GenerationResult result{Cohort{vocab.schema(), {}, {}}, {}, {}};
  auto& stats = result.stats;
  stats.requested = config.count;
  std::size_t total_length = 0;

  auto finalize_rates = [&] {
    if (stats.attempts > 0) {
      stats.malformed_rate = static_cast<double>(stats.malformed) / static_cast<double>(stats.attempts);
      stats.truncation_rate = static_cast<double>(stats.truncated) / static_cast<double>(stats.attempts);
    }
    if (stats.emitted > 0) stats.mean_length = static_cast<double>(total_length) / static_cast<double>(stats.emitted);
  };

  for (std::size_t i = 0; i < config.count; ++i) {
    const std::string id = "synthetic-" + std::to_string(i);
    bool done = false;
    for (std::size_t attempt = 0; attempt <= config.max_retries && !done; ++attempt) {
      const std::uint64_t slot_seed = derive_seed(config.seed, i, attempt);
      ++stats.attempts;
      auto sample = sample_sequence(model, vocab, config, derive_seed(slot_seed, kSampleStream));
      std::optional<tok::TokenSequence> tokens = std::move(sample.tokens);
      if (sample.truncated) {
        ++stats.truncated;
        tokens = tok::salvage_truncated(*tokens, vocab);
        if (!tokens) {
          ++stats.malformed;
          continue;
        }
        ++stats.salvaged;
      }
      auto decoded = tok::decode(*tokens, vocab, config.value_mode, derive_seed(slot_seed, kValueStream));
      auto* patient = std::get_if<PatientRecord>(&decoded);
      if (!patient) {
        ++stats.malformed;
        continue;
      }
      patient->patient_id = id;
      if (!validate_patient(*patient, vocab.schema()).empty()) {
        ++stats.malformed;
        continue;
      }
      tokens->patient_id = id;
      total_length += tokens->size();
      result.cohort.patients.push_back(std::move(*patient));
      result.cohort.splits.push_back(Split::synthetic);
      result.sequences.push_back(std::move(*tokens));
      ++stats.emitted;
      done = true;
    }
    if (!done) {
      finalize_rates();
      std::ostringstream msg;
      msg << "generate: retry budget exhausted for patient slot " << i << " after " << (config.max_retries + 1)
          << " attempts; malformed rate " << stats.malformed_rate << " (" << stats.malformed << "/" << stats.attempts
          << ")";
      throw Error(msg.str());
    }
  }
  finalize_rates();
  return result;
}

}  // namespace ehrgen::gen
