#include "tiger/diff/autodiff.hpp"

#include <fmt/format.h>

namespace tiger::diff {

Tensor2& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor2(value.rows(), value.cols());
  return grad;
}

Var::Var(Tensor2 value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

void Tape::backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw DimensionError(
        fmt::format("backward expects a [1x1] loss, got {}", loss.value().shape_string()));
  }
  if (!loss.requires_grad()) return;
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void zero_grads(ParamList& params) {
  for (auto& p : params) p.var.zero_grad();
}

}  // namespace tiger::diff
