#pragma once

#include <memory>
#include <span>

#include "ehrgen/lm/model.hpp"

namespace ehrgen::lm {

// Token-by-token evaluation with cached keys and values, for generation.
// Produces the same distributions as Model::forward (up to float rounding)
// at O(position) cost per step.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const Model& model);
  ~IncrementalDecoder();
  IncrementalDecoder(IncrementalDecoder&&) noexcept;
  IncrementalDecoder& operator=(IncrementalDecoder&&) noexcept;

  void reset();
  // Feeds the token at position(); returns next-token logits (vocab entries),
  // valid until the next call. Throws PreconditionError when the context is
  // full or the id is out of range.
  std::span<const float> step(Token id);
  std::size_t position() const noexcept;
  std::size_t context() const noexcept;

 private:
  struct State;
  std::unique_ptr<State> s_;
};

}  // namespace ehrgen::lm
