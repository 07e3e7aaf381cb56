#include "ehrgen/lm/config.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ehrgen/util/error.hpp"

namespace ehrgen::lm {

using nlohmann::json;

void check_config(const ModelConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw PreconditionError(std::string("model config: ") + what);
  };
  require(c.vocab_size >= 1, "vocab_size must be positive");
  require(c.context >= 2, "context must be at least 2");
  require(c.dim >= 1 && c.heads >= 1, "dim and heads must be positive");
  require(c.dim % c.heads == 0, "dim must be divisible by heads");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t d = c.dim;
  std::size_t n = c.vocab_size * d + c.context * d + c.layers * (12 * d * d + 13 * d) + 2 * d;
  if (!c.tie_weights) n += c.vocab_size * d;
  return n;
}

std::size_t TensorInfo::size() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::vector<TensorInfo> parameter_tensors(const ModelConfig& c) {
  check_config(c);
  const std::size_t d = c.dim;
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    TensorInfo t{std::move(name), std::move(shape), offset};
    offset += t.size();
    out.push_back(std::move(t));
  };
  add("wte", {c.vocab_size, d});
  add("wpe", {c.context, d});
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    add(p + "ln_1.weight", {d});
    add(p + "ln_1.bias", {d});
    add(p + "attn.c_attn.weight", {3 * d, d});
    add(p + "attn.c_attn.bias", {3 * d});
    add(p + "attn.c_proj.weight", {d, d});
    add(p + "attn.c_proj.bias", {d});
    add(p + "ln_2.weight", {d});
    add(p + "ln_2.bias", {d});
    add(p + "mlp.c_fc.weight", {4 * d, d});
    add(p + "mlp.c_fc.bias", {4 * d});
    add(p + "mlp.c_proj.weight", {d, 4 * d});
    add(p + "mlp.c_proj.bias", {d});
  }
  add("ln_f.weight", {d});
  add("ln_f.bias", {d});
  if (!c.tie_weights) add("lm_head.weight", {c.vocab_size, d});
  return out;
}

ParamLayout make_layout(const ModelConfig& c) {
  const auto tensors = parameter_tensors(c);
  ParamLayout lay;
  std::size_t i = 0;
  auto next = [&] { return tensors.at(i++).offset; };
  lay.wte = next();
  lay.wpe = next();
  for (std::size_t l = 0; l < c.layers; ++l) {
    ParamLayout::Layer L{};
    L.ln1_w = next();
    L.ln1_b = next();
    L.qkv_w = next();
    L.qkv_b = next();
    L.attn_proj_w = next();
    L.attn_proj_b = next();
    L.ln2_w = next();
    L.ln2_b = next();
    L.fc_w = next();
    L.fc_b = next();
    L.fc_proj_w = next();
    L.fc_proj_b = next();
    lay.layers.push_back(L);
  }
  lay.lnf_w = next();
  lay.lnf_b = next();
  lay.head = c.tie_weights ? lay.wte : next();
  lay.total = tensors.back().offset + tensors.back().size();
  return lay;
}

const char* to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "linear"; }

LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "linear") return LrSchedule::linear;
  throw Error("unknown learning-rate schedule '" + s + "' (constant | linear)");
}

void check_train_config(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw PreconditionError(std::string("train config: ") + what);
  };
  require(std::isfinite(c.learning_rate) && c.learning_rate >= 0.0, "learning_rate must be finite and >= 0");
  require(c.epochs >= 1 && c.batch_size >= 1 && c.grad_accum >= 1, "epochs, batch_size and grad_accum must be positive");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0, "betas must lie in [0, 1)");
  require(c.eps > 0.0, "eps must be positive");
  require(c.grad_clip >= 0.0, "grad_clip must be >= 0");
}

json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"context", c.context},     {"layers", c.layers},
          {"heads", c.heads},           {"dim", c.dim},             {"dropout", c.dropout},
          {"tie_weights", c.tie_weights}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.context = j.value("context", c.context);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.dim = j.value("dim", c.dim);
  c.dropout = j.value("dropout", c.dropout);
  c.tie_weights = j.value("tie_weights", c.tie_weights);
  c.seed = j.value("seed", c.seed);
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"grad_accum", c.grad_accum},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"grad_clip", c.grad_clip},
          {"schedule", to_string(c.schedule)},
          {"shuffle", c.shuffle},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum = j.value("grad_accum", c.grad_accum);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.schedule = lr_schedule_from_string(j.value("schedule", std::string(to_string(c.schedule))));
  c.shuffle = j.value("shuffle", c.shuffle);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace ehrgen::lm
