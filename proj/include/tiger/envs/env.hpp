#pragma once

#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tiger/diff/rng.hpp"
#include "tiger/errors.hpp"

namespace tiger::envs {

struct EnvStepResult {
  std::vector<std::vector<double>> observations;  // one per controlled agent
  std::vector<double> global_state;
  double reward = 0.0;  // shared by every agent
  bool terminated = false;
  std::map<std::string, double> info;
};

/// Episodic cooperative task with a shared team reward.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvStepResult reset(Rng& rng) = 0;
  virtual EnvStepResult step(std::span<const int> joint_action) = 0;

  virtual std::string name() const = 0;
  virtual std::size_t n_agents() const = 0;
  virtual std::size_t n_actions() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t horizon() const = 0;
  /// Step count since the last reset.
  virtual std::size_t time() const = 0;
  /// Fresh instance with the same configuration and no episode in progress.
  virtual std::unique_ptr<Environment> clone() const = 0;

  /// Every action is legal in both shipped tasks; kept for the agent API.
  std::vector<std::vector<bool>> legal_actions() const {
    return std::vector<std::vector<bool>>(n_agents(), std::vector<bool>(n_actions(), true));
  }

 protected:
  void check_actions(std::span<const int> joint_action) const;
};

/// Writes one line-delimited JSON trace record: t, actions, reward, terminated.
void write_trace_line(std::ostream& os, std::size_t t, std::span<const int> actions, double reward,
                      bool terminated);

}  // namespace tiger::envs
