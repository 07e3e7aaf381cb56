#include "ehrgen/lm/network.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "ehrgen/util/error.hpp"

namespace ehrgen::lm {

namespace {

constexpr double kLnEps = 1e-5;

template <class Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using RowVec = Eigen::Matrix<Real, 1, Eigen::Dynamic>;
template <class Real>
using ColVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <class Real>
Eigen::Map<const Mat<Real>> cmat(const Real* p, std::size_t off, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const Mat<Real>>(p + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <class Real>
Eigen::Map<Mat<Real>> mat(Real* p, std::size_t off, std::size_t rows, std::size_t cols) {
  return Eigen::Map<Mat<Real>>(p + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <class Real>
Eigen::Map<const RowVec<Real>> cvec(const Real* p, std::size_t off, std::size_t n) {
  return Eigen::Map<const RowVec<Real>>(p + off, static_cast<Eigen::Index>(n));
}
template <class Real>
Eigen::Map<RowVec<Real>> vec(Real* p, std::size_t off, std::size_t n) {
  return Eigen::Map<RowVec<Real>>(p + off, static_cast<Eigen::Index>(n));
}

template <class Real>
void layer_norm(const Mat<Real>& x, const Real* w, const Real* b, std::size_t d, Mat<Real>& out, ColVec<Real>& mean,
                ColVec<Real>& rstd) {
  const auto n = x.rows();
  out.resize(n, x.cols());
  mean.resize(n);
  rstd.resize(n);
  const auto wv = cvec(w, 0, d).array();
  const auto bv = cvec(b, 0, d).array();
  for (Eigen::Index t = 0; t < n; ++t) {
    const Real m = x.row(t).mean();
    const Real var = (x.row(t).array() - m).square().mean();
    const Real r = Real(1) / std::sqrt(var + Real(kLnEps));
    mean(t) = m;
    rstd(t) = r;
    out.row(t) = ((x.row(t).array() - m) * r) * wv + bv;
  }
}

// dx += LayerNorm backward of dout; accumulates dw, db.
template <class Real>
void layer_norm_backward(const Mat<Real>& dout, const Mat<Real>& x, const ColVec<Real>& mean,
                         const ColVec<Real>& rstd, const Real* w, Real* dw, Real* db, std::size_t d, Mat<Real>& dx) {
  const auto wv = cvec(w, 0, d).array();
  auto dwv = vec(dw, 0, d).array();
  auto dbv = vec(db, 0, d).array();
  RowVec<Real> xhat, dxhat;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    xhat = (x.row(t).array() - mean(t)) * rstd(t);
    dxhat = dout.row(t).array() * wv;
    dwv += dout.row(t).array() * xhat.array();
    dbv += dout.row(t).array();
    const Real m1 = dxhat.mean();
    const Real m2 = (dxhat.array() * xhat.array()).mean();
    dx.row(t).array() += rstd(t) * (dxhat.array() - m1 - xhat.array() * m2);
  }
}

template <class Real>
void linear(const Mat<Real>& in, const Real* p, std::size_t w_off, std::size_t b_off, std::size_t out_dim,
            Mat<Real>& out) {
  const auto k = static_cast<std::size_t>(in.cols());
  out.resize(in.rows(), static_cast<Eigen::Index>(out_dim));
  out.noalias() = in * cmat(p, w_off, out_dim, k).transpose();
  out.rowwise() += cvec(p, b_off, out_dim);
}

// din (overwritten) = dout W; dW += dout^T in; db += column sums.
template <class Real>
void linear_backward(const Mat<Real>& dout, const Mat<Real>& in, const Real* p, Real* g, std::size_t w_off,
                     std::size_t b_off, Mat<Real>& din) {
  const auto n = static_cast<std::size_t>(dout.cols());
  const auto k = static_cast<std::size_t>(in.cols());
  din.noalias() = dout * cmat(p, w_off, n, k);
  mat(g, w_off, n, k).noalias() += dout.transpose() * in;
  vec(g, b_off, n) += dout.colwise().sum();
}

template <class Real>
Real gelu(Real x) {
  const Real k = std::sqrt(Real(2) / std::numbers::pi_v<Real>);
  return Real(0.5) * x * (Real(1) + std::tanh(k * (x + Real(0.044715) * x * x * x)));
}

template <class Real>
Real gelu_grad(Real x) {
  const Real k = std::sqrt(Real(2) / std::numbers::pi_v<Real>);
  const Real th = std::tanh(k * (x + Real(0.044715) * x * x * x));
  return Real(0.5) * (Real(1) + th) + Real(0.5) * x * (Real(1) - th * th) * k * (Real(1) + Real(3 * 0.044715) * x * x);
}

// Inverted dropout mask: 0 with probability p, 1/(1-p) otherwise.
template <class Real>
void dropout_mask(Rng& rng, double p, Eigen::Index rows, Eigen::Index cols, Mat<Real>& mask) {
  mask.resize(rows, cols);
  const Real keep = Real(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) < p ? Real(0) : keep;
}

}  // namespace

template <class Real>
struct Network<Real>::Workspace {
  struct Layer {
    Mat<Real> x_in, ln1, qkv, y, x_mid, ln2, h, g;
    ColVec<Real> mean1, rstd1, mean2, rstd2;
    std::vector<Mat<Real>> probs, probs_mask;  // per head, [T, T]
    Mat<Real> proj_mask, mlp_mask;
  };
  std::vector<Token> ids;
  bool dropout = false;
  Mat<Real> emb_mask;
  std::vector<Layer> layers;
  Mat<Real> x_out, lnf, logp;
  ColVec<Real> meanf, rstdf;
};

template <class Real>
Network<Real>::Network(const ModelConfig& config)
    : config_(config), layout_(make_layout(config)), ws_(std::make_unique<Workspace>()) {
  ws_->layers.resize(config.layers);
}

template <class Real>
Network<Real>::~Network() = default;
template <class Real>
Network<Real>::Network(Network&&) noexcept = default;
template <class Real>
Network<Real>& Network<Real>::operator=(Network&&) noexcept = default;

template <class Real>
const Real* Network<Real>::log_probs() const {
  return ws_->logp.data();
}

template <class Real>
std::size_t Network<Real>::length() const noexcept {
  return ws_->ids.size();
}

template <class Real>
void Network<Real>::forward(const Real* p, std::span<const Token> ids, Rng* rng) {
  const std::size_t T = ids.size(), C = config_.dim, V = config_.vocab_size, NH = config_.heads, hs = C / NH;
  if (T == 0) throw PreconditionError("forward: empty sequence");
  if (T > config_.context) {
    throw PreconditionError("forward: sequence of length " + std::to_string(T) + " exceeds context " +
                            std::to_string(config_.context));
  }
  for (Token id : ids) {
    if (id >= V) throw PreconditionError("forward: token id " + std::to_string(id) + " out of range");
  }
  Workspace& w = *ws_;
  w.ids.assign(ids.begin(), ids.end());
  w.dropout = rng != nullptr && config_.dropout > 0.0;
  const auto Ti = static_cast<Eigen::Index>(T);
  const auto Ci = static_cast<Eigen::Index>(C);
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hs));

  Mat<Real> x(Ti, Ci);
  for (std::size_t t = 0; t < T; ++t) {
    x.row(static_cast<Eigen::Index>(t)) = cvec(p, layout_.wte + ids[t] * C, C) + cvec(p, layout_.wpe + t * C, C);
  }
  if (w.dropout) {
    dropout_mask(*rng, config_.dropout, Ti, Ci, w.emb_mask);
    x.array() *= w.emb_mask.array();
  }

  Mat<Real> tmp;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const auto& L = layout_.layers[l];
    auto& A = w.layers[l];
    A.x_in = x;
    layer_norm(A.x_in, p + L.ln1_w, p + L.ln1_b, C, A.ln1, A.mean1, A.rstd1);
    linear(A.ln1, p, L.qkv_w, L.qkv_b, 3 * C, A.qkv);

    A.y.resize(Ti, Ci);
    A.probs.resize(NH);
    A.probs_mask.resize(w.dropout ? NH : 0);
    for (std::size_t h = 0; h < NH; ++h) {
      const auto hi = static_cast<Eigen::Index>(h * hs), hsi = static_cast<Eigen::Index>(hs);
      const auto q = A.qkv.block(0, hi, Ti, hsi);
      const auto k = A.qkv.block(0, Ci + hi, Ti, hsi);
      const auto v = A.qkv.block(0, 2 * Ci + hi, Ti, hsi);
      Mat<Real>& P = A.probs[h];
      P.resize(Ti, Ti);
      P.noalias() = q * k.transpose();
      for (Eigen::Index i = 0; i < Ti; ++i) {
        auto row = P.row(i);
        const Real m = (row.head(i + 1) * scale).maxCoeff();
        Real sum = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          const Real e = std::exp(row(j) * scale - m);
          row(j) = e;
          sum += e;
        }
        row.head(i + 1) /= sum;
        row.tail(Ti - i - 1).setZero();
      }
      if (w.dropout) {
        dropout_mask(*rng, config_.dropout, Ti, Ti, A.probs_mask[h]);
        A.y.block(0, hi, Ti, hsi).noalias() = (P.array() * A.probs_mask[h].array()).matrix() * v;
      } else {
        A.y.block(0, hi, Ti, hsi).noalias() = P * v;
      }
    }
    linear(A.y, p, L.attn_proj_w, L.attn_proj_b, C, tmp);
    if (w.dropout) {
      dropout_mask(*rng, config_.dropout, Ti, Ci, A.proj_mask);
      tmp.array() *= A.proj_mask.array();
    }
    A.x_mid = A.x_in + tmp;

    layer_norm(A.x_mid, p + L.ln2_w, p + L.ln2_b, C, A.ln2, A.mean2, A.rstd2);
    linear(A.ln2, p, L.fc_w, L.fc_b, 4 * C, A.h);
    A.g = A.h.unaryExpr([](Real v) { return gelu(v); });
    linear(A.g, p, L.fc_proj_w, L.fc_proj_b, C, tmp);
    if (w.dropout) {
      dropout_mask(*rng, config_.dropout, Ti, Ci, A.mlp_mask);
      tmp.array() *= A.mlp_mask.array();
    }
    x = A.x_mid + tmp;
  }
  w.x_out = std::move(x);
  layer_norm(w.x_out, p + layout_.lnf_w, p + layout_.lnf_b, C, w.lnf, w.meanf, w.rstdf);
  w.logp.resize(Ti, static_cast<Eigen::Index>(V));
  w.logp.noalias() = w.lnf * cmat(p, layout_.head, V, C).transpose();
  for (Eigen::Index t = 0; t < Ti; ++t) {
    auto row = w.logp.row(t);
    const Real m = row.maxCoeff();
    const Real lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
}

template <class Real>
Real Network<Real>::loss(std::span<const Token> targets) const {
  const Workspace& w = *ws_;
  Real total = 0;
  for (std::size_t t = 0; t < targets.size() && t < w.ids.size(); ++t) {
    if (targets[t] == kNoTarget) continue;
    total -= w.logp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(targets[t]));
  }
  return total;
}

template <class Real>
void Network<Real>::backward(const Real* p, std::span<const Token> targets, Real* g, Real loss_scale) {
  Workspace& w = *ws_;
  const std::size_t T = w.ids.size(), C = config_.dim, V = config_.vocab_size, NH = config_.heads, hs = C / NH;
  const auto Ti = static_cast<Eigen::Index>(T);
  const auto Ci = static_cast<Eigen::Index>(C);
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hs));

  // d loss / d logits = softmax - onehot, per position with a target.
  Mat<Real> dlogits = Mat<Real>::Zero(Ti, static_cast<Eigen::Index>(V));
  for (std::size_t t = 0; t < T && t < targets.size(); ++t) {
    if (targets[t] == kNoTarget) continue;
    const auto ti = static_cast<Eigen::Index>(t);
    dlogits.row(ti) = w.logp.row(ti).array().exp() * loss_scale;
    dlogits(ti, static_cast<Eigen::Index>(targets[t])) -= loss_scale;
  }
  mat(g, layout_.head, V, C).noalias() += dlogits.transpose() * w.lnf;
  Mat<Real> dln = dlogits * cmat(p, layout_.head, V, C);
  Mat<Real> dx = Mat<Real>::Zero(Ti, Ci);
  layer_norm_backward(dln, w.x_out, w.meanf, w.rstdf, p + layout_.lnf_w, g + layout_.lnf_w, g + layout_.lnf_b, C, dx);

  Mat<Real> dbranch, dtmp, dg, dqkv;
  for (std::size_t l = config_.layers; l-- > 0;) {
    const auto& L = layout_.layers[l];
    auto& A = w.layers[l];
    // MLP branch: x = x_mid + drop(fc_proj(gelu(fc(ln2(x_mid)))))
    dbranch = dx;
    if (w.dropout) dbranch.array() *= A.mlp_mask.array();
    linear_backward(dbranch, A.g, p, g, L.fc_proj_w, L.fc_proj_b, dg);
    dg.array() *= A.h.unaryExpr([](Real v) { return gelu_grad(v); }).array();
    linear_backward(dg, A.ln2, p, g, L.fc_w, L.fc_b, dtmp);
    layer_norm_backward(dtmp, A.x_mid, A.mean2, A.rstd2, p + L.ln2_w, g + L.ln2_w, g + L.ln2_b, C, dx);

    // Attention branch: x_mid = x_in + drop(proj(attn(qkv(ln1(x_in)))))
    dbranch = dx;
    if (w.dropout) dbranch.array() *= A.proj_mask.array();
    Mat<Real> dy;
    linear_backward(dbranch, A.y, p, g, L.attn_proj_w, L.attn_proj_b, dy);
    dqkv.setZero(Ti, 3 * Ci);
    for (std::size_t h = 0; h < NH; ++h) {
      const auto hi = static_cast<Eigen::Index>(h * hs), hsi = static_cast<Eigen::Index>(hs);
      const auto q = A.qkv.block(0, hi, Ti, hsi);
      const auto k = A.qkv.block(0, Ci + hi, Ti, hsi);
      const auto v = A.qkv.block(0, 2 * Ci + hi, Ti, hsi);
      const auto dyh = dy.block(0, hi, Ti, hsi);
      const Mat<Real>& P = A.probs[h];
      Mat<Real> dP = dyh * v.transpose();
      if (w.dropout) {
        const Mat<Real> Pd = P.array() * A.probs_mask[h].array();
        dqkv.block(0, 2 * Ci + hi, Ti, hsi).noalias() = Pd.transpose() * dyh;
        dP.array() *= A.probs_mask[h].array();
      } else {
        dqkv.block(0, 2 * Ci + hi, Ti, hsi).noalias() = P.transpose() * dyh;
      }
      // Softmax backward, scaled into dS = d(q k^T).
      for (Eigen::Index i = 0; i < Ti; ++i) {
        const Real dot = (P.row(i).head(i + 1).array() * dP.row(i).head(i + 1).array()).sum();
        dP.row(i).head(i + 1) = (P.row(i).head(i + 1).array() * (dP.row(i).head(i + 1).array() - dot)) * scale;
        dP.row(i).tail(Ti - i - 1).setZero();
      }
      dqkv.block(0, hi, Ti, hsi).noalias() = dP * k;
      dqkv.block(0, Ci + hi, Ti, hsi).noalias() = dP.transpose() * q;
    }
    linear_backward(dqkv, A.ln1, p, g, L.qkv_w, L.qkv_b, dtmp);
    layer_norm_backward(dtmp, A.x_in, A.mean1, A.rstd1, p + L.ln1_w, g + L.ln1_w, g + L.ln1_b, C, dx);
  }

  if (w.dropout) dx.array() *= w.emb_mask.array();
  for (std::size_t t = 0; t < T; ++t) {
    const auto row = dx.row(static_cast<Eigen::Index>(t));
    vec(g, layout_.wte + w.ids[t] * C, C) += row;
    vec(g, layout_.wpe + t * C, C) += row;
  }
}

template class Network<float>;
template class Network<double>;

std::vector<float> init_parameters(const ModelConfig& config) {
  check_config(config);
  const ParamLayout lay = make_layout(config);
  std::vector<float> p(lay.total, 0.0f);
  Rng rng = make_rng(config.seed, 0x1417);
  // Box-Muller on our own uniforms keeps the draw identical across standard libraries.
  auto normal = [&rng] {
    const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  auto fill_normal = [&](std::size_t off, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[off + i] = static_cast<float>(0.02 * normal());
  };
  auto fill_ones = [&](std::size_t off, std::size_t n) { std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(off), n, 1.0f); };
  const std::size_t d = config.dim, V = config.vocab_size;
  fill_normal(lay.wte, V * d);
  fill_normal(lay.wpe, config.context * d);
  for (const auto& L : lay.layers) {
    fill_ones(L.ln1_w, d);
    fill_normal(L.qkv_w, 3 * d * d);
    fill_normal(L.attn_proj_w, d * d);
    fill_ones(L.ln2_w, d);
    fill_normal(L.fc_w, 4 * d * d);
    fill_normal(L.fc_proj_w, 4 * d * d);
  }
  fill_ones(lay.lnf_w, d);
  if (!config.tie_weights) fill_normal(lay.head, V * d);
  return p;
}

}  // namespace ehrgen::lm
