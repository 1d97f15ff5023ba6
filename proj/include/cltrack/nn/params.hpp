#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cltrack/nn/tensor.hpp"
#include "cltrack/random.hpp"

namespace cltrack::nn {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value) {
    for (const auto& p : params_)
      if (p.name == name) throw ConfigError("duplicate parameter name: " + name);
    params_.push_back({std::move(name), std::move(value)});
    return params_.size() - 1;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  std::size_t add_uniform(std::string name, std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return add(std::move(name), std::move(t));
  }

  std::size_t size() const noexcept { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    throw ConfigError("unknown parameter: " + name);
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
      if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
    return true;
  }

 private:
  std::vector<Parameter> params_;
};

/// One gradient tensor per parameter, index-aligned with a ParameterSet.
using Gradients = std::vector<Tensor>;

inline Gradients zero_gradients(const ParameterSet& ps) {
  Gradients g;
  g.reserve(ps.size());
  for (const auto& p : ps) g.emplace_back(p.value.shape(), 0.0);
  return g;
}

inline void accumulate(Gradients& into, const Gradients& from, double scale = 1.0) {
  if (into.size() != from.size()) throw ShapeError("gradient sets differ in length");
  for (std::size_t i = 0; i < into.size(); ++i) {
    if (into[i].shape() != from[i].shape()) throw ShapeError("gradient shape mismatch");
    for (std::size_t k = 0; k < into[i].size(); ++k) into[i][k] += scale * from[i][k];
  }
}

}  // namespace cltrack::nn
