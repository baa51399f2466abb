#pragma once

#include <array>
#include <vector>

#include "tiger/envs/env.hpp"

namespace tiger::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

double dot(Vec2 a, Vec2 b);
double distance(Vec2 a, Vec2 b);

struct TagConfig {
  std::size_t n_pursuers = 10;
  std::size_t n_adversaries = 3;
  std::size_t horizon = 100;
  std::size_t n_obstacles = 2;
  double obstacle_radius = 0.2;
  double arena_half_width = 1.0;
  double pursuer_speed = 0.05;
  double adversary_speed = 0.065;
  double collision_radius = 0.1;
  std::size_t max_placement_tries = 10000;

  void validate() const;
  friend bool operator==(const TagConfig&, const TagConfig&) = default;
};

/// Pursuit in a square arena with circular obstacles. The learner controls
/// the pursuers; adversaries follow a scripted evader that picks the
/// macroaction maximizing distance to the nearest pursuer. Every
/// (pursuer, adversary) pair within the collision radius after a step pays +1
/// to the team.
///
/// Macroactions: 0 no-op, 1 +x, 2 -x, 3 +y, 4 -y.
/// Observation of pursuer i:
///   [own position | own velocity | other pursuers relative | adversaries relative | obstacle offsets]
/// Global state: position and velocity of every pursuer, then every adversary.
class TagEnv final : public Environment {
 public:
  static constexpr std::size_t kActions = 5;

  explicit TagEnv(TagConfig config = {});

  EnvStepResult reset(Rng& rng) override;
  EnvStepResult step(std::span<const int> joint_action) override;

  std::string name() const override { return "tag"; }
  std::size_t n_agents() const override { return config_.n_pursuers; }
  std::size_t n_actions() const override { return kActions; }
  std::size_t obs_dim() const override;
  std::size_t state_dim() const override;
  std::size_t horizon() const override { return config_.horizon; }
  std::size_t time() const override { return t_; }
  std::unique_ptr<Environment> clone() const override;

  const TagConfig& config() const { return config_; }
  const std::vector<Vec2>& pursuers() const { return pursuer_pos_; }
  const std::vector<Vec2>& adversaries() const { return adversary_pos_; }
  const std::vector<Vec2>& obstacles() const { return obstacles_; }

  /// Test hook: places every entity explicitly with zero velocity and t = 0.
  EnvStepResult set_layout(std::vector<Vec2> pursuers, std::vector<Vec2> adversaries,
                           std::vector<Vec2> obstacles);

  /// Position after moving from `from` along `action` at `speed`: clamped to
  /// the arena, then truncated where the path first touches an obstacle.
  Vec2 move(Vec2 from, int action, double speed) const;

 private:
  EnvStepResult observe(double reward, bool terminated) const;
  int evade(Vec2 from) const;

  TagConfig config_;
  std::vector<Vec2> pursuer_pos_, pursuer_vel_;
  std::vector<Vec2> adversary_pos_, adversary_vel_;
  std::vector<Vec2> obstacles_;
  std::size_t t_ = 0;
  bool done_ = false;
};

}  // namespace tiger::envs
