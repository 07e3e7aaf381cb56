#include "ehrgen/lm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "ehrgen/util/error.hpp"
#include "ehrgen/util/hash.hpp"

namespace ehrgen::lm {

namespace {

std::vector<Token> shifted(const std::vector<Token>& seq) {
  std::vector<Token> t(seq.size(), kNoTarget);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) t[i] = seq[i + 1];
  return t;
}

std::string batch_hash(const std::vector<std::vector<Token>>& corpus, const std::vector<std::size_t>& rows) {
  std::string bytes;
  for (auto r : rows) {
    for (Token id : corpus[r]) bytes.append(reinterpret_cast<const char*>(&id), sizeof id);
    bytes.push_back('\n');
  }
  return sha256_hex(bytes).substr(0, 16);
}

}  // namespace

TrainResult train(Model& model, const std::vector<std::vector<Token>>& corpus, const TrainConfig& cfg,
                  const TrainCallbacks& cb) {
  check_train_config(cfg);
  const ModelConfig& mc = model.config();
  if (corpus.empty()) throw PreconditionError("train: corpus is empty");
  for (const auto& s : corpus) {
    if (s.size() < 2 || s.size() > mc.context) {
      throw PreconditionError("train: sequence length " + std::to_string(s.size()) + " outside [2, context]");
    }
    for (Token id : s) {
      if (id >= mc.vocab_size) throw PreconditionError("train: token id out of range");
    }
  }

  const std::size_t n = corpus.size();
  const std::size_t effective = cfg.batch_size * cfg.grad_accum;
  const std::size_t steps_per_epoch = (n + effective - 1) / effective;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  auto& params = model.parameters();
  auto& m = model.adam_m();
  auto& v = model.adam_v();
  std::vector<float> grads(params.size());
  Network<float> net(mc);
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> rows;
  TrainResult result;
  std::size_t local_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng = make_rng(cfg.seed, 0x5EED, epoch);
      for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
    }
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < n; start += effective) {
      const auto clock = std::chrono::steady_clock::now();
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + effective)));
      std::size_t tokens = 0;
      for (auto r : rows) tokens += corpus[r].size() - 1;
      const std::uint64_t step = model.step() + 1;
      std::fill(grads.begin(), grads.end(), 0.0f);
      double nll = 0.0;
      for (std::size_t slot = 0; slot < rows.size(); ++slot) {
        const auto& seq = corpus[rows[slot]];
        const auto targets = shifted(seq);
        Rng drop = make_rng(cfg.seed ^ 0xD50Full, step, slot);
        net.forward(params.data(), seq, &drop);
        nll += net.loss(targets);
        net.backward(params.data(), targets, grads.data(), 1.0f / static_cast<float>(tokens));
      }
      const double loss = nll / static_cast<double>(tokens);
      if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + ", batch " + batch_hash(corpus, rows) + ")");
      }

      double sq = 0.0;
      for (float g : grads) sq += static_cast<double>(g) * g;
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        throw NumericError("train: non-finite gradient at step " + std::to_string(step) + " (batch " +
                           batch_hash(corpus, rows) + ")");
      }
      if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
        const auto c = static_cast<float>(cfg.grad_clip / (norm + 1e-6));
        for (float& g : grads) g *= c;
      }

      double lr = cfg.learning_rate;
      if (cfg.schedule == LrSchedule::linear) {
        lr *= static_cast<double>(total_steps - local_step) / static_cast<double>(total_steps);
      }
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      const auto step_size = static_cast<float>(lr / bc1);
      const auto sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
      const auto eps = static_cast<float>(cfg.eps);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const float g = grads[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        params[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_bc2 + eps);
      }
      model.set_step(step);
      ++local_step;

      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count();
      StepRecord rec{step, epoch, loss, lr, norm, tokens, secs > 0 ? static_cast<double>(tokens) / secs : 0.0};
      result.history.push_back(rec);
      if (cb.on_step) cb.on_step(rec);
      epoch_nll += nll;
      epoch_tokens += tokens;
    }
    result.epoch_loss.push_back(epoch_nll / static_cast<double>(epoch_tokens));
    if (cb.on_epoch_end) cb.on_epoch_end(epoch, model);
  }
  return result;
}

double evaluate_loss(const Model& model, const std::vector<std::vector<Token>>& corpus) {
  Network<float> net(model.config());
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) continue;
    net.forward(model.parameters().data(), seq);
    nll += net.loss(shifted(seq));
    tokens += seq.size() - 1;
  }
  if (tokens == 0) throw PreconditionError("evaluate_loss: no target tokens");
  return nll / static_cast<double>(tokens);
}

}  // namespace ehrgen::lm
