#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ehrgen/lm/config.hpp"
#include "ehrgen/util/random.hpp"

namespace ehrgen::lm {

using Token = std::uint32_t;

// Target value meaning "no loss at this position".
inline constexpr Token kNoTarget = 0xFFFFFFFFu;

// Decoder-only transformer over one sequence at a time: learned positional
// embeddings, pre-LayerNorm blocks (causal multi-head attention, GELU MLP),
// final LayerNorm, projection to the vocabulary. Parameters live in a flat
// buffer laid out by make_layout(); weights are [out, in] row-major.
//
// The network keeps the activations of the last forward() so backward() can
// run. Real is float for training and double for gradient checks.
template <class Real>
class Network {
 public:
  explicit Network(const ModelConfig& config);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const ModelConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }

  // Runs positions 0..ids.size()-1. `dropout_rng` enables dropout (training);
  // pass nullptr for evaluation. Throws PreconditionError on an empty or
  // overlong sequence or an out-of-range id.
  void forward(const Real* params, std::span<const Token> ids, Rng* dropout_rng = nullptr);

  // Log-probabilities of the last forward, [T, vocab] row-major.
  const Real* log_probs() const;
  std::size_t length() const noexcept;

  // Sum over positions t with targets[t] != kNoTarget of -log p(targets[t] | ids[0..t]).
  Real loss(std::span<const Token> targets) const;

  // grads += scale * d loss(targets) / d params, for the last forward.
  void backward(const Real* params, std::span<const Token> targets, Real* grads, Real scale);

 private:
  struct Workspace;
  ModelConfig config_;
  ParamLayout layout_;
  std::unique_ptr<Workspace> ws_;
};

extern template class Network<float>;
extern template class Network<double>;

// Parameters drawn from N(0, 0.02^2) for embeddings and weight matrices;
// linear biases and LayerNorm biases 0, LayerNorm weights 1. Pure function of
// config.seed.
std::vector<float> init_parameters(const ModelConfig& config);

}  // namespace ehrgen::lm
