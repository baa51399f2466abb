#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiger/diff/autodiff.hpp"
#include "tiger/diff/nn.hpp"
#include "tiger/diff/rng.hpp"

namespace tiger::marl {

using diff::Tape;
using diff::Tensor2;
using diff::Var;

struct AgentHidden {
  Var lower;  // first GRU layer
  Var upper;  // second GRU layer, also the agent's graph node feature
};

/// Shared utility network: linear encoder, ReLU, two stacked GRU layers and a
/// linear Q-head over hidden [∥ temporal embedding].
struct AgentNet {
  diff::Linear encoder;
  diff::GruCell gru_lower;
  diff::GruCell gru_upper;
  diff::Linear q_head;

  AgentNet() = default;
  AgentNet(std::size_t obs_dim, std::size_t n_actions, std::size_t embed_dim, Rng& rng,
           std::size_t hidden = diff::kDefaultGruHidden);

  std::size_t obs_dim() const { return encoder.in_dim(); }
  std::size_t hidden_dim() const { return gru_upper.hidden_dim(); }
  std::size_t embed_dim() const { return q_head.in_dim() - hidden_dim(); }
  std::size_t n_actions() const { return q_head.out_dim(); }

  AgentHidden initial_hidden(std::size_t rows) const;
  /// Batched recurrent update; `obs` has one row per agent instance.
  AgentHidden recur(Tape& tape, const Var& obs, const AgentHidden& prev) const;
  /// Action values from the upper hidden and, with a nonzero embedding width,
  /// the temporal embedding rows.
  Var q_values(Tape& tape, const Var& upper, const Var& embedding = {}) const;
  void collect(diff::ParamList& out, const std::string& prefix) const;
};

struct AgentOutput {
  std::vector<double> action_values;
  Tensor2 lower;
  Tensor2 upper;
};

/// One agent, one step, plain values.
AgentOutput agent_forward(const AgentNet& net, std::span<const double> observation,
                          const Tensor2& prev_lower, const Tensor2& prev_upper,
                          std::optional<std::span<const double>> embedding = std::nullopt);

/// Index of the largest legal value; ties go to the lowest index.
int greedy_action(std::span<const double> values, const std::vector<bool>& legal);

/// ε-greedy joint action. `values` holds one row per agent.
std::vector<int> select_actions(const Tensor2& values, double epsilon, Rng& rng,
                                const std::vector<std::vector<bool>>& legal);

}  // namespace tiger::marl
