#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tiger/diff/autodiff.hpp"
#include "tiger/diff/rng.hpp"

namespace tiger::tgraph {

using diff::Tape;
using diff::Tensor2;
using diff::Var;

/// Sizes of the three neighborhood components.
struct GraphParams {
  double k_stat_nbr = 0.5;       // fraction of agent pairs kept as static edges
  std::size_t k_past_self = 1;   // self-history depth
  std::size_t k_past_nbr = 1;    // neighbor-history depth

  void validate() const;
  friend bool operator==(const GraphParams&, const GraphParams&) = default;
};

/// Unordered agent pair stored with first < second.
using AgentPair = std::pair<std::size_t, std::size_t>;

/// Node v_agent^time of the time-unrolled graph.
struct NodeRef {
  std::size_t agent = 0;
  std::size_t time = 0;
  auto operator<=>(const NodeRef&) const = default;
};

/// Directed link from a current node to an earlier node.
struct HistoryEdge {
  NodeRef from;
  NodeRef to;
  auto operator<=>(const HistoryEdge&) const = default;
};

struct TemporalGraph {
  std::size_t t = 0;
  std::size_t n_agents = 0;
  std::vector<NodeRef> nodes;               // sorted, unique
  std::vector<AgentPair> static_edges;      // sorted
  std::vector<HistoryEdge> self_history_edges;
  std::vector<HistoryEdge> nbr_history_edges;

  std::vector<std::size_t> static_neighbors(std::size_t agent) const;
  /// Static ∪ self-history ∪ neighbor-history neighbors of v_agent^t,
  /// sorted by (agent, time).
  std::vector<NodeRef> neighborhood(std::size_t agent) const;
};

/// N(N-1)/2.
std::size_t pair_count(std::size_t n_agents);
/// ⌈k · N(N-1)/2⌉, the number of static edges kept after pruning.
std::size_t static_edge_count(std::size_t n_agents, double k_stat_nbr);

/// Pairwise additive attention scorer over current agent features:
/// α_ij = softmax_{j≠i} LeakyReLU(aᵀ[W h_i ‖ W h_j]).
struct GatScorer {
  Var weight;     // d × d'
  Var attention;  // 2d' × 1

  GatScorer() = default;
  GatScorer(std::size_t feature_dim, std::size_t proj_dim, Rng& rng);

  std::size_t feature_dim() const { return weight.rows(); }
  std::size_t proj_dim() const { return weight.cols(); }

  /// Batched scores: `feats` stacks B groups of n_agents rows; the result is
  /// (B·n_agents)×n_agents with zero diagonal in every group.
  Var operator()(Tape& tape, const Var& feats, std::size_t n_agents) const;
  void collect(diff::ParamList& out, const std::string& prefix) const;
};

/// N×N attention matrix for one set of node features; rows sum to one over j ≠ i.
Tensor2 score_edges(const GatScorer& scorer, const Tensor2& node_feats);

/// Keeps the ⌈k · N(N-1)/2⌉ pairs with the highest symmetric score
/// (α_ij + α_ji)/2. Ties go to the lexicographically smaller pair.
std::vector<AgentPair> prune_topk(const Tensor2& attn, double k_stat_nbr);
/// Same on the rows [offset, offset + n) of a stacked attention matrix.
std::vector<AgentPair> prune_topk(const Tensor2& attn, std::size_t row_offset, double k_stat_nbr);

TemporalGraph build_temporal_neighborhood(std::span<const AgentPair> static_edges,
                                          std::size_t n_agents, std::size_t t,
                                          const GraphParams& params);

/// Multiplier that is exactly 1 in the forward pass and carries the gradient
/// of the symmetric pair score (α_ij + α_ji)/2 backwards. Entry r refers to
/// flat indices into `attn` for (i, j) and (j, i), or nullopt for rows that
/// do not come from a static edge.
using PairIndex = std::optional<std::pair<std::size_t, std::size_t>>;
Var static_edge_gates(Tape& tape, const Var& attn, std::span<const PairIndex> pairs);

}  // namespace tiger::tgraph
