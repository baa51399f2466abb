#include "tiger/envs/env.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tiger::envs {

void Environment::check_actions(std::span<const int> joint_action) const {
  if (joint_action.size() != n_agents()) {
    throw DomainError(fmt::format("{}: expected {} actions, got {}", name(), n_agents(),
                                  joint_action.size()));
  }
  for (std::size_t i = 0; i < joint_action.size(); ++i) {
    if (joint_action[i] < 0 || static_cast<std::size_t>(joint_action[i]) >= n_actions()) {
      throw DomainError(fmt::format("{}: action {} of agent {} outside [0, {})", name(),
                                    joint_action[i], i, n_actions()));
    }
  }
}

void write_trace_line(std::ostream& os, std::size_t t, std::span<const int> actions, double reward,
                      bool terminated) {
  nlohmann::json j;
  j["t"] = t;
  j["actions"] = std::vector<int>(actions.begin(), actions.end());
  j["reward"] = reward;
  j["terminated"] = terminated;
  os << j.dump() << '\n';
}

}  // namespace tiger::envs
