#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ehrgen::lm {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t context = 1024;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t dim = 384;
  double dropout = 0.1;
  bool tie_weights = true;  // output projection shares the token embedding
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

// Throws PreconditionError unless vocab_size >= 1, context >= 2, dim >= 1,
// heads >= 1, dim % heads == 0 and dropout in [0, 1).
void check_config(const ModelConfig& config);

// Closed form: V*d + N*d + L*(12 d^2 + 13 d) + 2 d, plus V*d when untied
// (V vocab, N context, L layers, d dim).
std::size_t parameter_count(const ModelConfig& config);

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;  // row-major; weights are [out, in]
  std::size_t offset = 0;          // into the flat parameter buffer
  std::size_t size() const;
};

// Offsets of every tensor inside the flat parameter buffer.
struct ParamLayout {
  struct Layer {
    std::size_t ln1_w, ln1_b, qkv_w, qkv_b, attn_proj_w, attn_proj_b;
    std::size_t ln2_w, ln2_b, fc_w, fc_b, fc_proj_w, fc_proj_b;
  };
  std::size_t wte = 0, wpe = 0;
  std::vector<Layer> layers;
  std::size_t lnf_w = 0, lnf_b = 0;
  std::size_t head = 0;  // == wte when tied
  std::size_t total = 0;
};

ParamLayout make_layout(const ModelConfig& config);
// The same layout as named tensors, in buffer order.
std::vector<TensorInfo> parameter_tensors(const ModelConfig& config);

enum class LrSchedule { constant, linear };

const char* to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;  // sequences per micro-batch
  std::size_t grad_accum = 2;    // micro-batches per optimizer step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  LrSchedule schedule = LrSchedule::linear;
  bool shuffle = true;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

// Throws PreconditionError unless batch sizes and epochs are positive and the
// optimizer constants are in range. A learning rate of 0 is allowed.
void check_train_config(const TrainConfig& config);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace ehrgen::lm
