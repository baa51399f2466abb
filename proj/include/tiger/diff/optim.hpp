#pragma once

#include <cstdint>
#include <vector>

#include "tiger/diff/autodiff.hpp"

namespace tiger::diff {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are shaped like the parameters they track.
class Adam {
 public:
  Adam(AdamConfig config, ParamList params);

  /// Applies one update from the accumulated gradients. Throws TrainingError
  /// naming the first parameter whose gradient is not finite; in that case
  /// nothing is modified.
  void step();

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const ParamList& params() const noexcept { return params_; }
  std::vector<Tensor2>& first_moments() noexcept { return m_; }
  std::vector<Tensor2>& second_moments() noexcept { return v_; }
  const std::vector<Tensor2>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor2>& second_moments() const noexcept { return v_; }
  void set_step_count(std::uint64_t step) noexcept { step_ = step; }

 private:
  AdamConfig config_;
  ParamList params_;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  std::uint64_t step_ = 0;
};

double global_norm(const ParamList& params);

/// Rescales all gradients jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(ParamList& params, double max_norm = 10.0);

}  // namespace tiger::diff
