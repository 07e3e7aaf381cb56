#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehrgen/core/record.hpp"
#include "ehrgen/lm/model.hpp"
#include "ehrgen/lm/trainer.hpp"
#include "ehrgen/pipeline/config.hpp"
#include "ehrgen/tok/codec.hpp"

namespace ehrgen::pipeline {

inline constexpr const char* kToolName = "ehrgen";
inline constexpr const char* kToolVersion = "0.1.0";

// Provenance block embedded in every artifact: tool version, stage name,
// seed and the SHA-256 of the canonical stage config.
nlohmann::json provenance(const std::string& stage, const nlohmann::json& stage_config, std::uint64_t seed);

std::string canonical_hash(const nlohmann::json& j);

struct TokenizedCohort {
  std::vector<tok::TokenSequence> sequences;
  std::size_t shortened = 0;  // cut to the context at a visit boundary
  std::size_t dropped = 0;    // first visit alone exceeds the context
};

// Encodes every patient; with context > 0, sequences are fitted to it.
TokenizedCohort tokenize_cohort(const Cohort& cohort, const tok::Vocabulary& vocab, tok::EncodeMode mode,
                                std::size_t context);

struct TrainedModel {
  lm::Model model;
  lm::TrainResult result;
  std::vector<double> validation_loss;  // per epoch, empty without validation data
};

// Builds the model for `vocab` and trains it. Progress lines go to `log`
// when given.
TrainedModel train_model(const tok::Vocabulary& vocab, const std::vector<tok::TokenSequence>& train,
                         const std::vector<tok::TokenSequence>& validation, lm::ModelConfig model,
                         const lm::TrainConfig& train_config, std::ostream* log);

// history.json content; wall-clock fields only when !deterministic.
nlohmann::json training_history(const TrainedModel& trained, bool deterministic);

// A stage output directory with a manifest recording the stage key (hash of
// config and inputs) and the SHA-256 of each output file. A stage is reused
// when the key matches and every output still hashes the same. An output
// whose content changed since it was recorded is a hash conflict.
class StageCache {
 public:
  StageCache(std::filesystem::path dir, std::string stage, nlohmann::json key_material);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path file(const std::string& name) const { return dir_ / name; }
  const std::string& key() const noexcept { return key_; }

  // True when the outputs can be reused. Throws Error ("hash conflict") when
  // a recorded output was modified; `force` discards the old manifest instead.
  bool valid(bool force) const;
  // Records `outputs` (names relative to dir()) under the current key.
  void commit(const std::vector<std::string>& outputs) const;
  std::string output_hash(const std::string& name) const;

 private:
  std::filesystem::path dir_;
  std::string stage_;
  std::string key_;
};

struct StageOutcome {
  std::string stage;
  bool cached = false;
};

struct PipelineOptions {
  bool force = false;
  std::ostream* log = nullptr;
};

struct PipelineResult {
  std::vector<StageOutcome> stages;
  std::filesystem::path report_dir;
  std::filesystem::path reference_report_dir;  // empty when disabled
};

// simulate -> split -> build-vocab -> tokenize -> train -> generate ->
// evaluate, each stage cached under config.work_dir/<stage>. The effective
// config is written to work_dir/effective_config.json.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineOptions& options = {});

}  // namespace ehrgen::pipeline
