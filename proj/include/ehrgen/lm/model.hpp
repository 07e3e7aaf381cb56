#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ehrgen/lm/config.hpp"
#include "ehrgen/lm/network.hpp"

namespace ehrgen::lm {

// Token-id matrix padded on the right; mask is 1 on real tokens.
struct Batch {
  std::size_t rows = 0, cols = 0;
  std::vector<Token> ids;
  std::vector<std::uint8_t> mask;

  // Pads with `pad_id` to the longest sequence.
  static Batch pad(const std::vector<std::vector<Token>>& seqs, Token pad_id = 0);
  std::size_t length(std::size_t row) const;  // real tokens in the row
};

// [rows, cols, vocab] log-probabilities; entry (r, t) is the distribution of
// the token following position t.
struct LogProbs {
  std::size_t rows = 0, cols = 0, vocab = 0;
  std::vector<float> data;
  const float* at(std::size_t r, std::size_t t) const { return data.data() + (r * cols + t) * vocab; }
};

// Next-token targets of a batch: targets(r, t) = ids(r, t + 1) where that
// position is a real token; the pad mask is 0 elsewhere.
struct Targets {
  std::size_t rows = 0, cols = 0;
  std::vector<Token> ids;
  std::vector<std::uint8_t> mask;
};
Targets shift_targets(const Batch& batch);

// Parameters, configuration and optimizer state.
class Model {
 public:
  Model() = default;
  // Initialises parameters with init_parameters(config).
  explicit Model(const ModelConfig& config);
  Model(const ModelConfig& config, std::vector<float> parameters);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<float>& parameters() noexcept { return params_; }
  const std::vector<float>& parameters() const noexcept { return params_; }

  // Adam state.
  std::vector<float>& adam_m() noexcept { return m_; }
  std::vector<float>& adam_v() noexcept { return v_; }
  const std::vector<float>& adam_m() const noexcept { return m_; }
  const std::vector<float>& adam_v() const noexcept { return v_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  // Evaluation-mode forward of each row over its full padded width. Throws
  // PreconditionError when cols > context or an id is out of range.
  LogProbs forward(const Batch& batch) const;

 private:
  ModelConfig config_;
  std::vector<float> params_, m_, v_;
  std::uint64_t step_ = 0;
};

// Mean of -log p(target) over positions with mask 1. Throws
// PreconditionError on shape mismatch or when every position is masked.
double clm_loss(const LogProbs& log_probs, const Targets& targets);

}  // namespace ehrgen::lm
