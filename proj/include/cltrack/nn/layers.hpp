#pragma once

#include <cmath>
#include <vector>

#include "cltrack/nn/ops.hpp"
#include "cltrack/nn/tape.hpp"

namespace cltrack::nn {

struct AttentionConfig {
  std::size_t d_model = 32;
  std::size_t heads = 2;
  /// Per-head widths; zero means d_model / heads.
  std::size_t d_k = 0;
  std::size_t d_v = 0;

  std::size_t key_width() const { return d_k ? d_k : d_model / heads; }
  std::size_t value_width() const { return d_v ? d_v : d_model / heads; }

  void validate() const {
    if (heads == 0 || d_model == 0) throw ConfigError("attention needs at least one head and a positive width");
    if ((d_k == 0 || d_v == 0) && d_model % heads != 0)
      throw ConfigError("d_model must be divisible by the head count");
  }
};

/// Per-head projections W_Q[i], W_K[i] (d_model x d_k), W_V[i] (d_model x d_v)
/// and the output projection W_O (heads*d_v x d_model).
struct MhaVars {
  std::vector<Var> wq, wk, wv;
  Var wo;
};

struct FeedForwardVars {
  Var w1, b1, w2, b2;
};

/// softmax(Q K^T / sqrt(d_k)) V
inline Var scaled_dot_attention(Tape& t, Var q, Var k, Var v) {
  const Tensor& qv = t.value(q);
  const Tensor& kv = t.value(k);
  const Tensor& vv = t.value(v);
  if (qv.cols() != kv.cols())
    throw ShapeError("attention: query width " + std::to_string(qv.cols()) + " != key width " +
                     std::to_string(kv.cols()));
  if (kv.rows() != vv.rows())
    throw ShapeError("attention: " + std::to_string(kv.rows()) + " keys but " + std::to_string(vv.rows()) +
                     " values");
  const Var scores = scale(t, matmul_nt(t, q, k), 1.0 / std::sqrt(static_cast<double>(kv.cols())));
  return matmul(t, softmax_rows(t, scores), v);
}

inline Var multi_head_attention(Tape& t, const AttentionConfig& cfg, const MhaVars& w, Var q, Var k, Var v) {
  cfg.validate();
  if (w.wq.size() != cfg.heads || w.wk.size() != cfg.heads || w.wv.size() != cfg.heads)
    throw ShapeError("multi_head_attention: projection count does not match head count");
  for (Var x : {q, k, v})
    if (t.value(x).cols() != cfg.d_model) throw ShapeError("multi_head_attention: input width != d_model");
  std::vector<Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t i = 0; i < cfg.heads; ++i)
    heads.push_back(scaled_dot_attention(t, matmul(t, q, w.wq[i]), matmul(t, k, w.wk[i]), matmul(t, v, w.wv[i])));
  const Var cat = heads.size() == 1 ? heads.front() : concat_cols(t, heads);
  return matmul(t, cat, w.wo);
}

/// relu(x W1 + b1) W2 + b2
inline Var feed_forward(Tape& t, const FeedForwardVars& w, Var x) {
  return add_bias(t, matmul(t, relu(t, add_bias(t, matmul(t, x, w.w1), w.b1)), w.w2), w.b2);
}

/// Sinusoidal encoding of positions 0..rows-1.
inline Tensor positional_encoding(std::size_t rows, std::size_t width) {
  Tensor pe = Tensor::matrix(rows, width);
  for (std::size_t pos = 0; pos < rows; ++pos)
    for (std::size_t j = 0; j < width; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(width));
      pe(pos, j) = (j % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  return pe;
}

// Tensor-in, tensor-out forms of the layers above.

struct MhaWeights {
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;
};

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;
};

inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  Tape t;
  return t.value(scaled_dot_attention(t, t.constant(q), t.constant(k), t.constant(v)));
}

inline Tensor multi_head_attention(const AttentionConfig& cfg, const MhaWeights& w, const Tensor& q, const Tensor& k,
                                   const Tensor& v) {
  Tape t;
  MhaVars vars;
  for (const auto& m : w.wq) vars.wq.push_back(t.constant(m));
  for (const auto& m : w.wk) vars.wk.push_back(t.constant(m));
  for (const auto& m : w.wv) vars.wv.push_back(t.constant(m));
  vars.wo = t.constant(w.wo);
  return t.value(multi_head_attention(t, cfg, vars, t.constant(q), t.constant(k), t.constant(v)));
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset) {
  return kernel::layer_norm(x, gain, offset, kLayerNormEps);
}

inline Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w) {
  Tape t;
  FeedForwardVars v{t.constant(w.w1), t.constant(w.b1), t.constant(w.w2), t.constant(w.b2)};
  return t.value(feed_forward(t, v, t.constant(x)));
}

}  // namespace cltrack::nn
