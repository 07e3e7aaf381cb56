#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/split.hpp"
#include "ehrgen/gen/generate.hpp"
#include "ehrgen/lm/config.hpp"
#include "ehrgen/metrics/report.hpp"
#include "ehrgen/sim/sim_spec.hpp"
#include "ehrgen/tok/codec.hpp"
#include "ehrgen/tok/vocabulary.hpp"

namespace ehrgen::pipeline {

// One flat file drives a whole run. Every stage seed is derived from `seed`
// (derive_seed(seed, stage)), so changing it reshuffles everything at once.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::filesystem::path work_dir = "work";  // relative to the config file
  bool deterministic = true;                // leave wall-clock fields out of artifacts

  std::optional<std::filesystem::path> sim_spec;  // empty: built-in default spec
  std::size_t patients = 5000;
  SplitFractions split;

  tok::VocabularyConfig tokenizer;
  tok::EncodeMode encode_mode = tok::EncodeMode::binned;

  lm::ModelConfig model;  // vocab_size and seed are filled in at run time
  lm::TrainConfig train;
  gen::GenConfig generate;
  metrics::EvaluationConfig evaluate;
  bool reference_report = true;  // also evaluate with the test split as synthetic data
};

enum class SeedStream : std::uint64_t {
  simulate = 1, split = 2, model_init = 3, train = 4, generate = 5, evaluate = 6,
};

std::uint64_t stage_seed(const PipelineConfig& config, SeedStream stream);

// Unknown keys are rejected with PreconditionError so typos do not silently
// fall back to defaults. Relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& config);

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Applies "a.b.c=value" overrides; value is parsed as JSON when possible and
// taken as a string otherwise.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& assignments);

nlohmann::json tokenizer_to_json(const tok::VocabularyConfig& config, tok::EncodeMode mode);

// The desk-scale defaults used by configs/pipeline.json.
PipelineConfig default_pipeline_config();

}  // namespace ehrgen::pipeline
