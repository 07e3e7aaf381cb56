#include "ehrgen/lm/incremental.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "ehrgen/util/error.hpp"

namespace ehrgen::lm {

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<float, Eigen::Dynamic, 1>;
using CMap = Eigen::Map<const Mat>;
using CVec = Eigen::Map<const Vec>;

Vec layer_norm(const Vec& x, const float* w, const float* b) {
  const auto n = x.size();
  const float m = x.mean();
  const float var = (x.array() - m).square().mean();
  const float r = 1.0f / std::sqrt(var + 1e-5f);
  return ((x.array() - m) * r) * CVec(w, n).array() + CVec(b, n).array();
}

float gelu(float x) {
  const float k = std::sqrt(2.0f / std::numbers::pi_v<float>);
  return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

}  // namespace

struct IncrementalDecoder::State {
  const Model* model;
  ParamLayout layout;
  std::vector<Mat> keys, values;  // per layer, [context, dim]
  std::size_t pos = 0;
  Vec logits;
};

IncrementalDecoder::IncrementalDecoder(const Model& model) : s_(std::make_unique<State>()) {
  const auto& c = model.config();
  s_->model = &model;
  s_->layout = make_layout(c);
  const auto n = static_cast<Eigen::Index>(c.context), d = static_cast<Eigen::Index>(c.dim);
  s_->keys.assign(c.layers, Mat(n, d));
  s_->values.assign(c.layers, Mat(n, d));
}

IncrementalDecoder::~IncrementalDecoder() = default;
IncrementalDecoder::IncrementalDecoder(IncrementalDecoder&&) noexcept = default;
IncrementalDecoder& IncrementalDecoder::operator=(IncrementalDecoder&&) noexcept = default;

void IncrementalDecoder::reset() { s_->pos = 0; }
std::size_t IncrementalDecoder::position() const noexcept { return s_->pos; }
std::size_t IncrementalDecoder::context() const noexcept { return s_->model->config().context; }

std::span<const float> IncrementalDecoder::step(Token id) {
  State& s = *s_;
  const ModelConfig& c = s.model->config();
  const float* p = s.model->parameters().data();
  if (s.pos >= c.context) throw PreconditionError("incremental decoder: context is full");
  if (id >= c.vocab_size) throw PreconditionError("incremental decoder: token id out of range");
  const auto C = static_cast<Eigen::Index>(c.dim);
  const auto V = static_cast<Eigen::Index>(c.vocab_size);
  const auto hs = C / static_cast<Eigen::Index>(c.heads);
  const float scale = 1.0f / std::sqrt(static_cast<float>(hs));
  const auto t = static_cast<Eigen::Index>(s.pos);

  Vec x = CVec(p + s.layout.wte + id * c.dim, C) + CVec(p + s.layout.wpe + s.pos * c.dim, C);
  Vec y(C), scores;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto& L = s.layout.layers[l];
    const Vec ln1 = layer_norm(x, p + L.ln1_w, p + L.ln1_b);
    const Vec qkv = CMap(p + L.qkv_w, 3 * C, C) * ln1 + CVec(p + L.qkv_b, 3 * C);
    s.keys[l].row(t) = qkv.segment(C, C).transpose();
    s.values[l].row(t) = qkv.segment(2 * C, C).transpose();
    for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(c.heads); ++h) {
      const auto K = s.keys[l].block(0, h * hs, t + 1, hs);
      const auto Vh = s.values[l].block(0, h * hs, t + 1, hs);
      scores = K * qkv.segment(h * hs, hs);
      scores *= scale;
      const float m = scores.maxCoeff();
      scores = (scores.array() - m).exp();
      scores /= scores.sum();
      y.segment(h * hs, hs).noalias() = Vh.transpose() * scores;
    }
    x += CMap(p + L.attn_proj_w, C, C) * y + CVec(p + L.attn_proj_b, C);
    const Vec ln2 = layer_norm(x, p + L.ln2_w, p + L.ln2_b);
    Vec h = CMap(p + L.fc_w, 4 * C, C) * ln2 + CVec(p + L.fc_b, 4 * C);
    h = h.unaryExpr([](float v) { return gelu(v); });
    x += CMap(p + L.fc_proj_w, C, 4 * C) * h + CVec(p + L.fc_proj_b, C);
  }
  const Vec lnf = layer_norm(x, p + s.layout.lnf_w, p + s.layout.lnf_b);
  s.logits.noalias() = CMap(p + s.layout.head, V, C) * lnf;
  ++s.pos;
  return {s.logits.data(), static_cast<std::size_t>(V)};
}

}  // namespace ehrgen::lm
