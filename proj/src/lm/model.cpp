#include "ehrgen/lm/model.hpp"

#include <algorithm>

#include "ehrgen/util/error.hpp"

namespace ehrgen::lm {

Batch Batch::pad(const std::vector<std::vector<Token>>& seqs, Token pad_id) {
  Batch b;
  b.rows = seqs.size();
  for (const auto& s : seqs) b.cols = std::max(b.cols, s.size());
  b.ids.assign(b.rows * b.cols, pad_id);
  b.mask.assign(b.rows * b.cols, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    std::copy(seqs[r].begin(), seqs[r].end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * b.cols));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(r * b.cols), seqs[r].size(), 1);
  }
  return b;
}

std::size_t Batch::length(std::size_t row) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < cols; ++t) n += mask[row * cols + t];
  return n;
}

Targets shift_targets(const Batch& b) {
  Targets t;
  t.rows = b.rows;
  t.cols = b.cols;
  t.ids.assign(b.rows * b.cols, 0);
  t.mask.assign(b.rows * b.cols, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    for (std::size_t c = 0; c + 1 < b.cols; ++c) {
      if (b.mask[r * b.cols + c] && b.mask[r * b.cols + c + 1]) {
        t.ids[r * b.cols + c] = b.ids[r * b.cols + c + 1];
        t.mask[r * b.cols + c] = 1;
      }
    }
  }
  return t;
}

Model::Model(const ModelConfig& config) : Model(config, init_parameters(config)) {}

Model::Model(const ModelConfig& config, std::vector<float> parameters)
    : config_(config), params_(std::move(parameters)) {
  check_config(config_);
  if (params_.size() != parameter_count(config_)) throw PreconditionError("parameter buffer does not match config");
  m_.assign(params_.size(), 0.0f);
  v_.assign(params_.size(), 0.0f);
}

LogProbs Model::forward(const Batch& batch) const {
  if (batch.cols > config_.context) throw PreconditionError("forward: batch wider than the context");
  LogProbs out;
  out.rows = batch.rows;
  out.cols = batch.cols;
  out.vocab = config_.vocab_size;
  out.data.resize(out.rows * out.cols * out.vocab);
  if (batch.cols == 0) return out;
  Network<float> net(config_);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    net.forward(params_.data(), std::span<const Token>(batch.ids.data() + r * batch.cols, batch.cols));
    std::copy_n(net.log_probs(), batch.cols * out.vocab, out.data.begin() + static_cast<std::ptrdiff_t>(r * batch.cols * out.vocab));
  }
  return out;
}

double clm_loss(const LogProbs& lp, const Targets& targets) {
  if (lp.rows != targets.rows || lp.cols != targets.cols) throw PreconditionError("clm_loss: shape mismatch");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < lp.rows; ++r) {
    for (std::size_t t = 0; t < lp.cols; ++t) {
      const std::size_t i = r * lp.cols + t;
      if (!targets.mask[i]) continue;
      if (targets.ids[i] >= lp.vocab) throw PreconditionError("clm_loss: target id out of range");
      total -= lp.at(r, t)[targets.ids[i]];
      ++count;
    }
  }
  if (count == 0) throw PreconditionError("clm_loss: every position is padding");
  return total / static_cast<double>(count);
}

}  // namespace ehrgen::lm
