#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ehrgen/lm/model.hpp"

namespace ehrgen::lm {

struct StepRecord {
  std::uint64_t step = 0;  // optimizer step, 1-based, cumulative over the model's life
  std::size_t epoch = 0;   // 1-based
  double loss = 0.0;       // mean NLL per target token in the effective batch
  double learning_rate = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t tokens = 0;  // target tokens in the effective batch
  double tokens_per_sec = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(std::size_t epoch, const Model&)> on_epoch_end;
};

struct TrainResult {
  std::vector<StepRecord> history;
  std::vector<double> epoch_loss;  // token-weighted mean over each epoch
};

// Causal-LM training with Adam. Each optimizer step consumes
// batch_size * grad_accum sequences (the last step of an epoch may be
// smaller); gradients are summed over every target token of that effective
// batch and divided by its token count, so accumulation never changes the
// result. Sequences are visited in an order shuffled per epoch from
// config.seed; dropout draws are keyed by (seed, step, slot), which makes the
// run a pure function of its inputs.
//
// Throws PreconditionError on an empty corpus or a sequence that is shorter
// than 2 tokens or longer than the context, and NumericError (with the step
// and a hash of the batch) when the loss stops being finite.
TrainResult train(Model& model, const std::vector<std::vector<Token>>& corpus, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

// Mean NLL per target token in evaluation mode.
double evaluate_loss(const Model& model, const std::vector<std::vector<Token>>& corpus);

}  // namespace ehrgen::lm
