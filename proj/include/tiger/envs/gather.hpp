#pragma once

#include <vector>

#include "tiger/envs/env.hpp"

namespace tiger::envs {

struct GatherConfig {
  std::size_t n_agents = 5;
  std::size_t horizon = 8;
  std::size_t n_goals = 3;
  /// Agents that see the optimal goal; a fresh subset is drawn every episode.
  std::size_t n_informed = 2;

  void validate() const;
  friend bool operator==(const GatherConfig&, const GatherConfig&) = default;
};

/// One-shot coordination over three goals. Action a_k sends an agent to goal
/// g_{k+1}. Unanimity on the optimal goal pays +10 and ends the episode (a
/// win); unanimity on another goal pays +5 and ends it; any disagreement
/// costs -5 and play continues until the horizon.
///
/// Observation of agent i:
///   [optimal-goal one-hot (zeros unless informed) | informed flag |
///    previous joint action, one-hot per agent | t / horizon | agent id one-hot]
/// Global state:
///   [optimal-goal one-hot | informed mask | previous joint action | t / horizon]
class GatherEnv final : public Environment {
 public:
  static constexpr double kWinReward = 10.0;
  static constexpr double kSuboptimalReward = 5.0;
  static constexpr double kMiscoordinationReward = -5.0;

  explicit GatherEnv(GatherConfig config = {});

  EnvStepResult reset(Rng& rng) override;
  EnvStepResult step(std::span<const int> joint_action) override;

  std::string name() const override { return "gather"; }
  std::size_t n_agents() const override { return config_.n_agents; }
  std::size_t n_actions() const override { return config_.n_goals; }
  std::size_t obs_dim() const override;
  std::size_t state_dim() const override;
  std::size_t horizon() const override { return config_.horizon; }
  std::size_t time() const override { return t_; }
  std::unique_ptr<Environment> clone() const override;

  const GatherConfig& config() const { return config_; }
  std::size_t optimal_goal() const { return optimal_; }
  const std::vector<bool>& informed() const { return informed_; }
  /// Test hook: fixes the hidden goal and informed set of the current episode.
  void set_episode(std::size_t optimal_goal, std::vector<bool> informed);

 private:
  EnvStepResult observe(double reward, bool terminated, bool win) const;

  GatherConfig config_;
  std::size_t optimal_ = 0;
  std::vector<bool> informed_;
  std::vector<int> last_actions_;  // -1 before the first step
  std::size_t t_ = 0;
  bool done_ = false;
};

}  // namespace tiger::envs
