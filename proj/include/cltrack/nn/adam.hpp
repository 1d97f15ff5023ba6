#pragma once

#include <cmath>

#include "cltrack/nn/params.hpp"

namespace cltrack::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Learning-rate multiplier applied at every epoch boundary.
  double decay = 0.94;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::size_t step = 0;
};

inline double learning_rate_at_epoch(const AdamConfig& cfg, std::size_t epoch) {
  return cfg.lr * std::pow(cfg.decay, static_cast<double>(epoch));
}

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient count != parameter count");
  if (state.m.empty()) {
    state.m = zero_gradients(params);
    state.v = zero_gradients(params);
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state belongs to another model");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].value;
    const Tensor& g = grads[i];
    if (g.shape() != p.shape()) throw ShapeError("adam_step: gradient shape mismatch for " + params[i].name);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

}  // namespace cltrack::nn
