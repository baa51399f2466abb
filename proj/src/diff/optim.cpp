#include "tiger/diff/optim.hpp"

#include <cmath>

#include <fmt/format.h>

namespace tiger::diff {

Adam::Adam(AdamConfig config, ParamList params) : config_(config), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.var.rows(), p.var.cols());
    v_.emplace_back(p.var.rows(), p.var.cols());
  }
}

void Adam::step() {
  for (auto& p : params_) {
    if (p.var.has_grad() && !p.var.grad().all_finite()) {
      throw TrainingError(fmt::format("non-finite gradient in parameter '{}'", p.name));
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& var = params_[k].var;
    if (!var.has_grad()) continue;
    auto w = var.mutable_value().flat();
    auto g = var.grad().flat();
    auto m = m_[k].flat();
    auto v = v_[k].flat();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

double global_norm(const ParamList& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.var.has_grad()) continue;
    for (double g : p.var.node()->grad.flat()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(ParamList& params, double max_norm) {
  const double norm = global_norm(params);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (!p.var.has_grad()) continue;
      for (double& g : p.var.grad().flat()) g *= s;
    }
  }
  return norm;
}

}  // namespace tiger::diff
