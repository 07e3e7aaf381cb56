#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ehrgen/lm/model.hpp"

namespace ehrgen::lm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_tensor;
};

// Compares backpropagated gradients of the mean per-token NLL over `batch`
// with central differences (L(p + eps) - L(p - eps)) / 2 eps, in double
// precision with dropout off. `samples` parameters are drawn at random,
// spread evenly over the tensors so every tensor is probed. The relative
// error of one entry is |a - n| / max(|a|, |n|, 1e-6).
// Throws PreconditionError unless epsilon lies in [1e-6, 1e-3].
GradCheckResult grad_check(const Model& model, const std::vector<std::vector<Token>>& batch, double epsilon,
                           std::size_t samples = 200, std::uint64_t seed = 0);

}  // namespace ehrgen::lm
