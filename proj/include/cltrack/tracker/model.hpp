#pragma once

// Transformer tracker network.
//
// Encoder: n+1 frame descriptors -> linear projection (+ positions)
//          -> self-attention -> feed-forward.
// Decoder: n previous boxes (5-vectors in crop coordinates) -> linear
//          embedding (+ positions) -> self-attention. The cross block takes
//          queries from the encoder output, keys from the encoder rows of the
//          n previous frames and values from the decoder self-attention output,
//          so frame i keys box i. Then feed-forward and a two-layer box head
//          on the current-frame row.
// Every block is residual, optionally followed by layer normalisation.

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "cltrack/augment.hpp"
#include "cltrack/image.hpp"
#include "cltrack/loss.hpp"
#include "cltrack/nn/layers.hpp"
#include "cltrack/nn/params.hpp"
#include "cltrack/random.hpp"

namespace cltrack {

struct LayerNormMask {
  bool encoder_attention = true;
  bool encoder_ffn = true;
  bool decoder_self = true;
  bool decoder_cross = true;
  bool decoder_ffn = true;
};

struct TrackerConfig {
  std::size_t n_history = 3;
  nn::AttentionConfig attention{32, 2};
  /// Side of the square network input the crop is resampled to.
  int input_size = 64;
  /// Patch grid of the fixed descriptor stage (grid x grid cells, 3 channels each).
  int grid = 8;
  double crop_factor = kDefaultCropFactor;
  /// Lower bound on the crop side in pixels, so a collapsed prediction still sees context.
  double min_crop_side = 8.0;
  LossWeights loss_weights;
  /// Squash predicted corner coordinates into the crop window with a sigmoid.
  bool head_squash = true;
  double beta_min = 0.01;
  double beta_max = 0.99;
  /// Feed-forward hidden width; 0 means 2 * d_model.
  std::size_t ffn_hidden = 0;
  bool positional_encoding = true;
  LayerNormMask layer_norm;

  std::size_t d_model() const { return attention.d_model; }
  std::size_t hidden() const { return ffn_hidden ? ffn_hidden : 2 * attention.d_model; }
  std::size_t descriptor_size() const { return static_cast<std::size_t>(grid) * grid * 3; }

  void validate() const {
    attention.validate();
    if (n_history < 1) throw ConfigError("n_history must be at least 1");
    if (input_size <= 0 || grid <= 0 || input_size % grid != 0)
      throw ConfigError("input_size must be a positive multiple of grid");
    if (!(crop_factor > 0.0)) throw ConfigError("crop_factor must be positive");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0)) throw ConfigError("beta range must lie in (0, 1)");
  }

  /// Sizes used for the published model (ResNet-50 features are out of reach here).
  static TrackerConfig full_scale() {
    TrackerConfig c;
    c.n_history = 7;
    c.attention = {1024, 4};
    c.input_size = 224;
    c.grid = 14;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const TrackerConfig& c) {
  j = {{"n_history", c.n_history},
       {"d_model", c.attention.d_model},
       {"heads", c.attention.heads},
       {"d_k", c.attention.d_k},
       {"d_v", c.attention.d_v},
       {"input_size", c.input_size},
       {"grid", c.grid},
       {"crop_factor", c.crop_factor},
       {"min_crop_side", c.min_crop_side},
       {"lambda1", c.loss_weights.lambda1},
       {"lambda2", c.loss_weights.lambda2},
       {"head_squash", c.head_squash},
       {"beta_min", c.beta_min},
       {"beta_max", c.beta_max},
       {"ffn_hidden", c.ffn_hidden},
       {"positional_encoding", c.positional_encoding},
       {"layer_norm",
        {c.layer_norm.encoder_attention, c.layer_norm.encoder_ffn, c.layer_norm.decoder_self,
         c.layer_norm.decoder_cross, c.layer_norm.decoder_ffn}}};
}

inline void from_json(const nlohmann::json& j, TrackerConfig& c) {
  c = TrackerConfig{};
  static const std::vector<std::string> known = {
      "n_history", "d_model",  "heads",      "d_k",       "d_v",       "input_size",  "grid",
      "crop_factor", "min_crop_side", "lambda1", "lambda2", "head_squash", "beta_min", "beta_max",
      "ffn_hidden", "positional_encoding", "layer_norm"};
  for (const auto& [k, _] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown tracker key: " + k);
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_history", c.n_history);
  get("d_model", c.attention.d_model);
  get("heads", c.attention.heads);
  get("d_k", c.attention.d_k);
  get("d_v", c.attention.d_v);
  get("input_size", c.input_size);
  get("grid", c.grid);
  get("crop_factor", c.crop_factor);
  get("min_crop_side", c.min_crop_side);
  get("lambda1", c.loss_weights.lambda1);
  get("lambda2", c.loss_weights.lambda2);
  get("head_squash", c.head_squash);
  get("beta_min", c.beta_min);
  get("beta_max", c.beta_max);
  get("ffn_hidden", c.ffn_hidden);
  get("positional_encoding", c.positional_encoding);
  if (j.contains("layer_norm")) {
    const auto v = j.at("layer_norm").get<std::vector<bool>>();
    if (v.size() != 5) throw ConfigError("layer_norm mask needs 5 entries");
    c.layer_norm = {v[0], v[1], v[2], v[3], v[4]};
  }
  c.validate();
}

/// Fixed descriptor stage: averages non-overlapping patches of a
/// input_size x input_size crop into a grid x grid x 3 vector centred on zero.
inline std::vector<double> patch_descriptor(const Frame& crop, const TrackerConfig& cfg) {
  if (crop.width != cfg.input_size || crop.height != cfg.input_size)
    throw ShapeError("descriptor input is " + std::to_string(crop.width) + "x" + std::to_string(crop.height) +
                     ", expected " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size));
  const int cell = cfg.input_size / cfg.grid;
  std::vector<double> d(cfg.descriptor_size(), 0.0);
  const double inv = 1.0 / (cell * cell);
  for (int gy = 0; gy < cfg.grid; ++gy)
    for (int gx = 0; gx < cfg.grid; ++gx)
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int y = 0; y < cell; ++y)
          for (int x = 0; x < cell; ++x) s += crop.at(gx * cell + x, gy * cell + y, ch);
        d[(static_cast<std::size_t>(gy) * cfg.grid + gx) * 3 + ch] = s * inv - 0.5;
      }
  return d;
}

class TrackerModel {
 public:
  explicit TrackerModel(const TrackerConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    build(&rng);
  }

  /// Wraps existing parameters (e.g. from a checkpoint); names and shapes must match.
  TrackerModel(const TrackerConfig& cfg, nn::ParameterSet params) : cfg_(cfg) {
    cfg_.validate();
    build(nullptr);
    if (params.size() != params_.size()) throw ConfigError("checkpoint does not match the tracker configuration");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params[i].name != params_[i].name || params[i].value.shape() != params_[i].value.shape())
        throw ConfigError("checkpoint parameter mismatch at '" + params[i].name + "'");
    }
    params_ = std::move(params);
  }

  const TrackerConfig& config() const noexcept { return cfg_; }
  nn::ParameterSet& params() noexcept { return params_; }
  const nn::ParameterSet& params() const noexcept { return params_; }

  /// descriptors: (n+1) x descriptor_size, oldest first, current frame last.
  /// boxes: n x 5 previous boxes in crop coordinates, oldest first.
  /// Returns the 1 x 5 head output (u1x, u1y, u2x, u2y, beta) in crop coordinates.
  nn::Var forward(nn::Tape& t, const nn::Tensor& descriptors, const nn::Tensor& boxes) const {
    using namespace nn;
    const std::size_t n = cfg_.n_history;
    if (descriptors.rows() != n + 1 || descriptors.cols() != cfg_.descriptor_size())
      throw ShapeError("descriptor block is " + descriptors.shape_string());
    if (boxes.rows() != n || boxes.cols() != 5) throw ShapeError("box history is " + boxes.shape_string());
    const auto p = t.bind(params_);
    const std::size_t d = cfg_.d_model();

    auto embed = [&](const Tensor& x, std::size_t w, std::size_t b) {
      Var y = add_bias(t, matmul(t, t.constant(x), p[w]), p[b]);
      if (cfg_.positional_encoding) y = add(t, y, t.constant(positional_encoding(x.rows(), d)));
      return y;
    };
    auto norm = [&](bool on, Var x, std::size_t gain) { return on ? layer_norm(t, x, p[gain], p[gain + 1]) : x; };

    Tensor centred = boxes;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 4; ++j) centred(i, j) -= 0.5;

    const Var e0 = embed(descriptors, ix_.feature_w, ix_.feature_w + 1);
    const Var e1 = norm(cfg_.layer_norm.encoder_attention,
                        add(t, e0, multi_head_attention(t, cfg_.attention, mha(p, ix_.enc_attn), e0, e0, e0)), ix_.enc_ln1);
    const Var e2 = norm(cfg_.layer_norm.encoder_ffn, add(t, e1, feed_forward(t, ffn(p, ix_.enc_ffn), e1)), ix_.enc_ln2);

    const Var b0 = embed(centred, ix_.box_w, ix_.box_w + 1);
    const Var b1 = norm(cfg_.layer_norm.decoder_self,
                        add(t, b0, multi_head_attention(t, cfg_.attention, mha(p, ix_.dec_self), b0, b0, b0)), ix_.dec_ln1);
    const Var keys = slice_rows(t, e2, 0, n);
    const Var c0 = multi_head_attention(t, cfg_.attention, mha(p, ix_.dec_cross), e2, keys, b1);
    const Var c1 = norm(cfg_.layer_norm.decoder_cross, add(t, e2, c0), ix_.dec_ln2);
    const Var c2 = norm(cfg_.layer_norm.decoder_ffn, add(t, c1, feed_forward(t, ffn(p, ix_.dec_ffn), c1)), ix_.dec_ln3);

    const Var last = slice_rows(t, c2, n, n + 1);
    const Var hidden = relu(t, add_bias(t, matmul(t, last, p[ix_.head_w1]), p[ix_.head_w1 + 1]));
    const Var raw = add_bias(t, matmul(t, hidden, p[ix_.head_w2]), p[ix_.head_w2 + 1]);

    const Var coords_raw = slice_cols(t, raw, 0, 4);
    const Var coords = cfg_.head_squash ? sigmoid(t, coords_raw)
                                        : column_affine(t, coords_raw, {1, 1, 1, 1}, {0.5, 0.5, 0.5, 0.5});
    const Var beta = column_affine(t, sigmoid(t, slice_cols(t, raw, 4, 5)), {cfg_.beta_max - cfg_.beta_min},
                                   {cfg_.beta_min});
    return concat_cols(t, {coords, beta});
  }

  /// Projection of one crop's descriptor to a d_model feature vector.
  nn::Tensor features(const Frame& crop) const {
    const auto d = patch_descriptor(crop, cfg_);
    const auto& w = params_[ix_.feature_w].value;
    const auto& b = params_[ix_.feature_w + 1].value;
    nn::Tensor x = nn::Tensor::matrix(1, d.size(), d);
    nn::Tensor y = nn::matmul(x, w);
    for (std::size_t j = 0; j < y.cols(); ++j) y(0, j) += b[j];
    return nn::Tensor({y.cols()}, y.storage());
  }

 private:
  struct MhaIndex {
    std::size_t first = 0;  // wq[0..h), wk[0..h), wv[0..h), wo
  };
  struct FfnIndex {
    std::size_t first = 0;  // w1, b1, w2, b2
  };
  struct Indices {
    std::size_t feature_w = 0, box_w = 0;
    MhaIndex enc_attn, dec_self, dec_cross;
    FfnIndex enc_ffn, dec_ffn;
    std::size_t enc_ln1 = 0, enc_ln2 = 0, dec_ln1 = 0, dec_ln2 = 0, dec_ln3 = 0;
    std::size_t head_w1 = 0, head_w2 = 0;
  };

  nn::MhaVars mha(const std::vector<nn::Var>& p, MhaIndex m) const {
    const std::size_t h = cfg_.attention.heads;
    nn::MhaVars v;
    for (std::size_t i = 0; i < h; ++i) {
      v.wq.push_back(p[m.first + i]);
      v.wk.push_back(p[m.first + h + i]);
      v.wv.push_back(p[m.first + 2 * h + i]);
    }
    v.wo = p[m.first + 3 * h];
    return v;
  }

  nn::FeedForwardVars ffn(const std::vector<nn::Var>& p, FfnIndex f) const {
    return {p[f.first], p[f.first + 1], p[f.first + 2], p[f.first + 3]};
  }

  void build(Rng* rng) {
    const std::size_t d = cfg_.d_model();
    const std::size_t h = cfg_.attention.heads;
    const std::size_t dk = cfg_.attention.key_width();
    const std::size_t dv = cfg_.attention.value_width();
    const std::size_t hid = cfg_.hidden();
    auto dense = [&](const std::string& name, std::size_t in, std::size_t out) {
      const std::size_t i = weight(name + ".w", {in, out}, in);
      weight(name + ".b", {1, out}, in);
      return i;
    };
    auto attention = [&](const std::string& name) {
      MhaIndex m{params_.size()};
      for (const char* kind : {"wq", "wk", "wv"})
        for (std::size_t i = 0; i < h; ++i)
          weight(name + "." + kind + "." + std::to_string(i), {d, std::string(kind) == "wv" ? dv : dk}, d);
      weight(name + ".wo", {h * dv, d}, h * dv);
      return m;
    };
    auto feed = [&](const std::string& name) {
      FfnIndex f{params_.size()};
      dense(name + ".1", d, hid);
      dense(name + ".2", hid, d);
      return f;
    };
    auto layer_norm = [&](const std::string& name) {
      const std::size_t i = params_.add(name + ".gain", nn::Tensor({1, d}, 1.0));
      params_.add(name + ".offset", nn::Tensor({1, d}, 0.0));
      return i;
    };
    weight_rng_ = rng;
    ix_.feature_w = dense("feature", cfg_.descriptor_size(), d);
    ix_.enc_attn = attention("encoder.attention");
    ix_.enc_ln1 = layer_norm("encoder.norm1");
    ix_.enc_ffn = feed("encoder.ffn");
    ix_.enc_ln2 = layer_norm("encoder.norm2");
    ix_.box_w = dense("decoder.box_embedding", 5, d);
    ix_.dec_self = attention("decoder.self_attention");
    ix_.dec_ln1 = layer_norm("decoder.norm1");
    ix_.dec_cross = attention("decoder.cross_attention");
    ix_.dec_ln2 = layer_norm("decoder.norm2");
    ix_.dec_ffn = feed("decoder.ffn");
    ix_.dec_ln3 = layer_norm("decoder.norm3");
    ix_.head_w1 = dense("head.1", d, d);
    ix_.head_w2 = dense("head.2", d, 5);
    weight_rng_ = nullptr;
  }

  std::size_t weight(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in) {
    if (weight_rng_) return params_.add_uniform(name, std::move(shape), fan_in, *weight_rng_);
    return params_.add(name, nn::Tensor(std::move(shape), 0.0));
  }

  TrackerConfig cfg_;
  nn::ParameterSet params_;
  Indices ix_;
  Rng* weight_rng_ = nullptr;
};

}  // namespace cltrack
