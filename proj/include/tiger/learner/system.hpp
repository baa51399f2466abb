#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tiger/diff/autodiff.hpp"
#include "tiger/marl/agent.hpp"
#include "tiger/marl/mixer.hpp"
#include "tiger/tgat/encoder.hpp"
#include "tiger/tgraph/graph.hpp"

namespace tiger::learner {

using diff::Tape;
using diff::Tensor2;
using diff::Var;

struct ModelDims {
  std::size_t gru_hidden = 64;
  std::size_t gat_proj = 32;
  tgat::TgatDims tgat;
  marl::MixerDims mixer;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Every parameter set of one learner side (online or target).
struct Networks {
  marl::Algorithm algorithm = marl::Algorithm::qmix;
  std::size_t n_agents = 0;
  std::size_t state_dim = 0;
  marl::AgentNet agent;
  tgraph::GatScorer scorer;  // TIGER-MIX only
  tgat::TgatParams encoder;  // TIGER-MIX only
  marl::Mixer mixer;         // QMIX and TIGER-MIX

  Networks() = default;
  Networks(marl::Algorithm algorithm, std::size_t n_agents, std::size_t obs_dim, std::size_t n_actions,
           std::size_t state_dim, Rng& rng, const ModelDims& dims = {});

  bool uses_graph() const noexcept { return algorithm == marl::Algorithm::tiger_mix; }
  void collect(diff::ParamList& out) const;
  /// Independent copy whose parameters never record gradients.
  Networks frozen_copy() const;
};

/// Copies every parameter value of `from` into `to` (same architecture).
void copy_parameters(const Networks& from, Networks& to);

/// Recurrent and graph state carried across the steps of B parallel episodes.
struct UnrollState {
  marl::AgentHidden hidden;
  std::vector<tgat::NodeHistory> histories;  // one per batch element
};

UnrollState start_unroll(const Networks& nets, std::size_t batch);

struct StepOutput {
  Var q_values;    // (B·N) × |A|
  Var embeddings;  // (B·N) × embed, TIGER-MIX only
  std::vector<tgraph::TemporalGraph> graphs;
};

/// One time step for B episodes at once: recurrent update, edge scoring and
/// pruning, temporal neighborhoods from the recorded history, encoding and
/// action values. Appends the new base embeddings to the histories as constants.
/// `fixed_edges`, one list per episode, replaces the pruning decision.
StepOutput forward_step(Tape& tape, const Networks& nets, const tgraph::GraphParams& graph,
                        UnrollState& state, const Var& observations, std::size_t t,
                        const std::vector<std::vector<tgraph::AgentPair>>* fixed_edges = nullptr);

/// Q_tot for B rows of chosen utilities (B × N).
Var mix(Tape& tape, const Networks& nets, const Var& chosen, const Var& states, const Var& embeddings);

}  // namespace tiger::learner
