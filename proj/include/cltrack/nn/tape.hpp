#pragma once

// Reverse-mode differentiation over a linear tape of primitive operations.
//
// Every recorded node keeps its output value, a replay function that
// recomputes the value from the values of its inputs, and a backward function
// that pushes the node's gradient into its inputs. Parameter leaves remember
// which ParameterSet entry they were read from so that a stale tape (the
// parameters changed after the forward pass) is detected.

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cltrack/error.hpp"
#include "cltrack/nn/params.hpp"
#include "cltrack/nn/tensor.hpp"

namespace cltrack::nn {

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

class Tape {
 public:
  using Replay = std::function<Tensor(const Tape&)>;
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, {}, std::nullopt});
    return {nodes_.size() - 1};
  }

  Var parameter(const ParameterSet& ps, std::size_t index) {
    if (params_ && params_ != &ps) throw TapeCorruption("a tape may only read from one parameter set");
    params_ = &ps;
    nodes_.push_back(Node{ps[index].value, {}, {}, {}, {}, index});
    return {nodes_.size() - 1};
  }

  /// Parameter leaves for every entry of `ps`, in order.
  std::vector<Var> bind(const ParameterSet& ps) {
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) vars.push_back(parameter(ps, i));
    return vars;
  }

  Var record(Replay replay, std::vector<Var> inputs, Backward backward) {
    Tensor value = replay(*this);
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(replay), std::move(backward), std::nullopt});
    return {nodes_.size() - 1};
  }

  const Tensor& value(Var v) const { return node(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Var>& inputs(Var v) const { return node(v.id).inputs; }

  /// Gradient accumulated for `v` by the last backward pass (zero tensor if none reached it).
  Tensor grad(Var v) const {
    const auto& n = node(v.id);
    return n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
  }

  const Tensor& grad_of(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
  }

  Tensor& grad_ref(Var v) {
    auto& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
  }

  /// Recomputes every node from its recorded inputs and compares bit-for-bit.
  void verify_replay() const {
    check_parameters();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!n.replay) continue;
      const Tensor again = n.replay(*this);
      if (again.shape() != n.value.shape() ||
          std::memcmp(again.data().data(), n.value.data().data(), n.value.size() * sizeof(double)) != 0)
        throw TapeCorruption("replay of node " + std::to_string(i) + " does not reproduce its value");
    }
  }

  /// Parameter leaves must still match the parameter set they were read from.
  void check_parameters() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!n.param) continue;
      const Tensor& now = (*params_)[*n.param].value;
      if (now.shape() != n.value.shape() ||
          std::memcmp(now.data().data(), n.value.data().data(), now.size() * sizeof(double)) != 0)
        throw TapeCorruption("parameter '" + (*params_)[*n.param].name + "' changed after the forward pass");
    }
  }

  friend Gradients backward(Tape& tape, Var output, const Tensor& output_grad, bool verify);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> inputs;
    Replay replay;
    Backward backward;
    std::optional<std::size_t> param;
  };

  const Node& node(std::size_t id) const {
    if (id >= nodes_.size()) throw TapeCorruption("variable does not belong to this tape");
    return nodes_[id];
  }

  std::vector<Node> nodes_;
  const ParameterSet* params_ = nullptr;
};

/// Propagates `output_grad` (same shape as the output value) back through the
/// tape and returns the gradient for every parameter of the bound set.
inline Gradients backward(Tape& tape, Var output, const Tensor& output_grad, bool verify = false) {
  if (output.id >= tape.nodes_.size()) throw TapeCorruption("output variable does not belong to this tape");
  if (output_grad.shape() != tape.nodes_[output.id].value.shape())
    throw ShapeError("upstream gradient " + output_grad.shape_string() + " does not match output " +
                     tape.nodes_[output.id].value.shape_string());
  if (verify)
    tape.verify_replay();
  else
    tape.check_parameters();

  for (auto& n : tape.nodes_) n.grad = Tensor();
  tape.nodes_[output.id].grad = output_grad;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& n = tape.nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(tape, i);
  }

  Gradients grads;
  if (!tape.params_) return grads;
  grads = zero_gradients(*tape.params_);
  for (const auto& n : tape.nodes_)
    if (n.param && !n.grad.empty()) grads[*n.param] += n.grad;
  return grads;
}

}  // namespace cltrack::nn
