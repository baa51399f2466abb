#include "tiger/envs/tag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace tiger::envs {
namespace {

constexpr std::array<Vec2, TagEnv::kActions> kDirections{{{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

}  // namespace

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void TagConfig::validate() const {
  if (n_pursuers < 1) throw ConfigError("tag: n_pursuers must be positive");
  if (horizon < 1) throw ConfigError("tag: horizon must be positive");
  if (!(adversary_speed > pursuer_speed)) {
    throw ConfigError(fmt::format("tag: adversary speed {} must exceed pursuer speed {}",
                                  adversary_speed, pursuer_speed));
  }
  if (!(pursuer_speed > 0.0) || !(collision_radius > 0.0) || !(arena_half_width > 0.0) ||
      obstacle_radius < 0.0) {
    throw ConfigError("tag: speeds, radii and arena size must be positive");
  }
  if (n_obstacles > 0 && obstacle_radius >= arena_half_width) {
    throw ConfigError("tag: obstacle radius must be smaller than the arena half-width");
  }
}

TagEnv::TagEnv(TagConfig config) : config_(config) { config_.validate(); }

std::size_t TagEnv::obs_dim() const {
  return 4 + 2 * (config_.n_pursuers - 1) + 2 * config_.n_adversaries + 2 * config_.n_obstacles;
}

std::size_t TagEnv::state_dim() const { return 4 * (config_.n_pursuers + config_.n_adversaries); }

std::unique_ptr<Environment> TagEnv::clone() const { return std::make_unique<TagEnv>(config_); }

EnvStepResult TagEnv::reset(Rng& rng) {
  const double W = config_.arena_half_width;
  const double R = config_.obstacle_radius;
  obstacles_.clear();
  for (std::size_t k = 0; k < config_.n_obstacles; ++k) {
    bool placed = false;
    for (std::size_t tries = 0; tries < config_.max_placement_tries && !placed; ++tries) {
      const Vec2 c{rng.uniform(-(W - R), W - R), rng.uniform(-(W - R), W - R)};
      placed = std::all_of(obstacles_.begin(), obstacles_.end(),
                           [&](Vec2 o) { return distance(o, c) > 2.0 * R; });
      if (placed) obstacles_.push_back(c);
    }
    if (!placed) throw ConfigError(fmt::format("tag: could not place obstacle {}", k));
  }

  std::vector<Vec2> entities;
  const std::size_t total = config_.n_pursuers + config_.n_adversaries;
  for (std::size_t k = 0; k < total; ++k) {
    bool placed = false;
    for (std::size_t tries = 0; tries < config_.max_placement_tries && !placed; ++tries) {
      const Vec2 p{rng.uniform(-W, W), rng.uniform(-W, W)};
      placed = std::all_of(entities.begin(), entities.end(),
                           [&](Vec2 e) { return distance(e, p) > config_.collision_radius; }) &&
               std::all_of(obstacles_.begin(), obstacles_.end(),
                           [&](Vec2 o) { return distance(o, p) > R; });
      if (placed) entities.push_back(p);
    }
    if (!placed) throw ConfigError(fmt::format("tag: could not place entity {} without overlap", k));
  }
  pursuer_pos_.assign(entities.begin(), entities.begin() + config_.n_pursuers);
  adversary_pos_.assign(entities.begin() + config_.n_pursuers, entities.end());
  pursuer_vel_.assign(config_.n_pursuers, Vec2{});
  adversary_vel_.assign(config_.n_adversaries, Vec2{});
  t_ = 0;
  done_ = false;
  return observe(0.0, false);
}

EnvStepResult TagEnv::set_layout(std::vector<Vec2> pursuers, std::vector<Vec2> adversaries,
                                 std::vector<Vec2> obstacles) {
  if (pursuers.size() != config_.n_pursuers || adversaries.size() != config_.n_adversaries ||
      obstacles.size() != config_.n_obstacles) {
    throw DomainError("tag: layout does not match the configured entity counts");
  }
  pursuer_pos_ = std::move(pursuers);
  adversary_pos_ = std::move(adversaries);
  obstacles_ = std::move(obstacles);
  pursuer_vel_.assign(config_.n_pursuers, Vec2{});
  adversary_vel_.assign(config_.n_adversaries, Vec2{});
  t_ = 0;
  done_ = false;
  return observe(0.0, false);
}

Vec2 TagEnv::move(Vec2 from, int action, double speed) const {
  const double W = config_.arena_half_width;
  Vec2 to = from + speed * kDirections[static_cast<std::size_t>(action)];
  to.x = std::clamp(to.x, -W, W);
  to.y = std::clamp(to.y, -W, W);
  const Vec2 d = to - from;
  const double a = dot(d, d);
  if (a == 0.0) return from;

  double s = 1.0;
  const double R = config_.obstacle_radius;
  for (const Vec2& c : obstacles_) {
    const Vec2 rel = from - c;
    const double b = 2.0 * dot(d, rel);
    const double cc = dot(rel, rel) - R * R;
    if (cc <= 1e-12) {
      // On the boundary (after an earlier truncation): block inward motion.
      if (b < 0.0) s = 0.0;
      continue;
    }
    const double disc = b * b - 4.0 * a * cc;
    if (disc < 0.0) continue;
    const double hit = (-b - std::sqrt(disc)) / (2.0 * a);
    if (hit >= 0.0 && hit <= 1.0) s = std::min(s, hit);
  }
  return from + s * d;
}

int TagEnv::evade(Vec2 from) const {
  int best = 0;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(kActions); ++a) {
    const Vec2 to = move(from, a, config_.adversary_speed);
    double gap = std::numeric_limits<double>::infinity();
    for (const Vec2& p : pursuer_pos_) gap = std::min(gap, distance(p, to));
    if (gap > best_gap) {
      best_gap = gap;
      best = a;
    }
  }
  return best;
}

EnvStepResult TagEnv::step(std::span<const int> joint_action) {
  if (done_) throw DomainError("tag: step called on a finished episode");
  check_actions(joint_action);
  for (std::size_t i = 0; i < config_.n_pursuers; ++i) {
    const Vec2 next = move(pursuer_pos_[i], joint_action[i], config_.pursuer_speed);
    pursuer_vel_[i] = next - pursuer_pos_[i];
    pursuer_pos_[i] = next;
  }
  std::vector<Vec2> next_adv(adversary_pos_.size());
  for (std::size_t k = 0; k < adversary_pos_.size(); ++k) {
    next_adv[k] = move(adversary_pos_[k], evade(adversary_pos_[k]), config_.adversary_speed);
  }
  for (std::size_t k = 0; k < adversary_pos_.size(); ++k) {
    adversary_vel_[k] = next_adv[k] - adversary_pos_[k];
    adversary_pos_[k] = next_adv[k];
  }
  ++t_;
  double tags = 0.0;
  for (const Vec2& p : pursuer_pos_) {
    for (const Vec2& a : adversary_pos_) {
      if (distance(p, a) <= config_.collision_radius) tags += 1.0;
    }
  }
  done_ = t_ >= config_.horizon;
  return observe(tags, done_);
}

EnvStepResult TagEnv::observe(double reward, bool terminated) const {
  EnvStepResult out;
  const std::size_t N = config_.n_pursuers;
  out.observations.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> o;
    o.reserve(obs_dim());
    const Vec2 me = pursuer_pos_[i];
    o.insert(o.end(), {me.x, me.y, pursuer_vel_[i].x, pursuer_vel_[i].y});
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      const Vec2 r = pursuer_pos_[j] - me;
      o.insert(o.end(), {r.x, r.y});
    }
    for (const Vec2& a : adversary_pos_) {
      const Vec2 r = a - me;
      o.insert(o.end(), {r.x, r.y});
    }
    for (const Vec2& c : obstacles_) {
      const Vec2 r = c - me;
      o.insert(o.end(), {r.x, r.y});
    }
    out.observations.push_back(std::move(o));
  }
  auto& s = out.global_state;
  s.reserve(state_dim());
  for (std::size_t i = 0; i < N; ++i) {
    s.insert(s.end(), {pursuer_pos_[i].x, pursuer_pos_[i].y, pursuer_vel_[i].x, pursuer_vel_[i].y});
  }
  for (std::size_t k = 0; k < adversary_pos_.size(); ++k) {
    s.insert(s.end(),
             {adversary_pos_[k].x, adversary_pos_[k].y, adversary_vel_[k].x, adversary_vel_[k].y});
  }
  out.reward = reward;
  out.terminated = terminated;
  out.info["captures"] = reward;
  out.info["t"] = static_cast<double>(t_);
  return out;
}

}  // namespace tiger::envs
