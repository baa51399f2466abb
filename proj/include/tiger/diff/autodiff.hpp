#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiger/diff/tensor.hpp"

namespace tiger::diff {

struct Node {
  Tensor2 value;
  Tensor2 grad;
  bool requires_grad = false;

  /// Lazily allocates the gradient buffer with the value's shape.
  Tensor2& grad_buffer();
};

/// Handle to a value in the computation. Copies share the underlying node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor2 value, bool requires_grad = false);

  static Var constant(Tensor2 value) { return Var(std::move(value), false); }
  static Var parameter(Tensor2 value) { return Var(std::move(value), true); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor2& value() const { return node_->value; }
  Tensor2& mutable_value() { return node_->value; }
  Tensor2& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  const std::shared_ptr<Node>& node() const noexcept { return node_; }

  /// Zeroes the accumulated gradient (keeps the buffer allocated).
  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse-mode tape. Ops append backward closures; `backward` replays them
/// in reverse. One tape per training step, cleared after the update.
class Tape {
 public:
  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  /// Seeds d(loss)/d(loss) = 1 for a 1×1 loss and runs every closure in reverse.
  void backward(const Var& loss);
  void clear() noexcept { ops_.clear(); }
  std::size_t size() const noexcept { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

struct NamedParam {
  std::string name;
  Var var;
};
using ParamList = std::vector<NamedParam>;

void zero_grads(ParamList& params);

}  // namespace tiger::diff
