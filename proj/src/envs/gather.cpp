#include "tiger/envs/gather.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

namespace tiger::envs {

void GatherConfig::validate() const {
  if (n_agents < 2) throw ConfigError("gather: n_agents must be at least 2");
  if (horizon < 1) throw ConfigError("gather: horizon must be positive");
  if (n_goals < 2) throw ConfigError("gather: n_goals must be at least 2");
  if (n_informed > n_agents) {
    throw ConfigError(fmt::format("gather: n_informed {} exceeds n_agents {}", n_informed, n_agents));
  }
}

GatherEnv::GatherEnv(GatherConfig config) : config_(config) {
  config_.validate();
  informed_.assign(config_.n_agents, false);
  last_actions_.assign(config_.n_agents, -1);
}

std::size_t GatherEnv::obs_dim() const {
  return config_.n_goals + 1 + config_.n_agents * config_.n_goals + 1 + config_.n_agents;
}

std::size_t GatherEnv::state_dim() const {
  return config_.n_goals + config_.n_agents + config_.n_agents * config_.n_goals + 1;
}

std::unique_ptr<Environment> GatherEnv::clone() const { return std::make_unique<GatherEnv>(config_); }

EnvStepResult GatherEnv::reset(Rng& rng) {
  optimal_ = rng.below(config_.n_goals);
  // partial Fisher-Yates picks the informed subset
  std::vector<std::size_t> order(config_.n_agents);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < config_.n_informed; ++k) {
    std::swap(order[k], order[k + rng.below(config_.n_agents - k)]);
  }
  informed_.assign(config_.n_agents, false);
  for (std::size_t k = 0; k < config_.n_informed; ++k) informed_[order[k]] = true;
  last_actions_.assign(config_.n_agents, -1);
  t_ = 0;
  done_ = false;
  return observe(0.0, false, false);
}

void GatherEnv::set_episode(std::size_t optimal_goal, std::vector<bool> informed) {
  if (optimal_goal >= config_.n_goals || informed.size() != config_.n_agents) {
    throw DomainError("gather: invalid scripted episode");
  }
  optimal_ = optimal_goal;
  informed_ = std::move(informed);
  last_actions_.assign(config_.n_agents, -1);
  t_ = 0;
  done_ = false;
}

EnvStepResult GatherEnv::step(std::span<const int> joint_action) {
  if (done_) throw DomainError("gather: step called on a finished episode");
  check_actions(joint_action);
  std::copy(joint_action.begin(), joint_action.end(), last_actions_.begin());
  ++t_;
  const bool unanimous = std::all_of(joint_action.begin(), joint_action.end(),
                                     [&](int a) { return a == joint_action[0]; });
  double reward = kMiscoordinationReward;
  bool win = false;
  if (unanimous) {
    win = static_cast<std::size_t>(joint_action[0]) == optimal_;
    reward = win ? kWinReward : kSuboptimalReward;
  }
  done_ = unanimous || t_ >= config_.horizon;
  return observe(reward, done_, win);
}

EnvStepResult GatherEnv::observe(double reward, bool terminated, bool win) const {
  const std::size_t G = config_.n_goals;
  const std::size_t N = config_.n_agents;
  const double phase = static_cast<double>(t_) / static_cast<double>(config_.horizon);

  std::vector<double> joint(N * G, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    if (last_actions_[j] >= 0) joint[j * G + static_cast<std::size_t>(last_actions_[j])] = 1.0;
  }

  EnvStepResult out;
  out.observations.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> o;
    o.reserve(obs_dim());
    for (std::size_t g = 0; g < G; ++g) o.push_back(informed_[i] && g == optimal_ ? 1.0 : 0.0);
    o.push_back(informed_[i] ? 1.0 : 0.0);
    o.insert(o.end(), joint.begin(), joint.end());
    o.push_back(phase);
    for (std::size_t j = 0; j < N; ++j) o.push_back(i == j ? 1.0 : 0.0);
    out.observations.push_back(std::move(o));
  }

  auto& s = out.global_state;
  s.reserve(state_dim());
  for (std::size_t g = 0; g < G; ++g) s.push_back(g == optimal_ ? 1.0 : 0.0);
  for (std::size_t i = 0; i < N; ++i) s.push_back(informed_[i] ? 1.0 : 0.0);
  s.insert(s.end(), joint.begin(), joint.end());
  s.push_back(phase);

  out.reward = reward;
  out.terminated = terminated;
  out.info["win"] = win ? 1.0 : 0.0;
  out.info["optimal_goal"] = static_cast<double>(optimal_);
  out.info["t"] = static_cast<double>(t_);
  return out;
}

}  // namespace tiger::envs
