#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tiger/diff/autodiff.hpp"
#include "tiger/diff/nn.hpp"
#include "tiger/diff/rng.hpp"
#include "tiger/tgraph/graph.hpp"

namespace tiger::tgat {

using diff::Tape;
using diff::Tensor2;
using diff::Var;
using tgraph::AgentPair;
using tgraph::NodeRef;
using tgraph::TemporalGraph;

/// φ(Δt)_k = cos(ω_k Δt + b_k), with learnable ω and b (both 1×d_T).
struct TimeEncoder {
  Var frequency;
  Var phase;

  TimeEncoder() = default;
  /// ω_k = 10^{-9k/(d_T-1)}, b = 0.
  explicit TimeEncoder(std::size_t d_time);

  std::size_t dim() const { return frequency.cols(); }
  /// One row per entry of `deltas` (a rows×1 column of time gaps).
  Var operator()(Tape& tape, const Var& deltas) const;
  void collect(diff::ParamList& out, const std::string& prefix) const;
};

std::vector<double> time_encode(const TimeEncoder& enc, std::size_t delta_t);

struct TgatDims {
  std::size_t time = 16;
  std::size_t latent = 32;
  std::size_t fusion_hidden = 32;
  std::size_t embed = 32;
  friend bool operator==(const TgatDims&, const TgatDims&) = default;
};

struct TgatParams {
  TimeEncoder time;
  Var w_query;  // (d_0 + d_T) × d_h
  Var w_key;
  Var w_value;
  diff::Linear fuse_hidden;  // (d_h + obs) -> fusion hidden
  diff::Linear fuse_out;     // fusion hidden -> embed

  TgatParams() = default;
  TgatParams(std::size_t node_dim, std::size_t obs_dim, Rng& rng, const TgatDims& dims = {});

  std::size_t node_dim() const { return w_query.rows() - time.dim(); }
  std::size_t latent_dim() const { return w_query.cols(); }
  std::size_t obs_dim() const { return fuse_hidden.in_dim() - latent_dim(); }
  std::size_t embed_dim() const { return fuse_out.out_dim(); }
  void collect(diff::ParamList& out, const std::string& prefix) const;
};

/// Base embeddings h_j(τ) recorded along one episode, one N×d row block per step.
class NodeHistory {
 public:
  NodeHistory() = default;
  NodeHistory(std::size_t n_agents, std::size_t dim) : n_agents_(n_agents), dim_(dim) {}

  /// Appends the embeddings of step `steps()`.
  void push(Tensor2 step_embeddings);
  std::size_t steps() const noexcept { return steps_.size(); }
  std::size_t n_agents() const noexcept { return n_agents_; }
  std::size_t dim() const noexcept { return dim_; }
  bool contains(const NodeRef& node) const noexcept;
  /// Throws ConsistencyError when the node was never recorded.
  std::span<const double> at(const NodeRef& node) const;
  void clear() { steps_.clear(); }

 private:
  std::size_t n_agents_ = 0;
  std::size_t dim_ = 0;
  std::vector<Tensor2> steps_;
};

/// Z_i(t): row 0 is self ∥ φ(0); the remaining rows are h_j(τ) ∥ φ(t − τ) in
/// the given order.
Tensor2 build_feature_matrix(std::span<const double> self_embed,
                             std::span<const std::pair<std::span<const double>, std::size_t>> neighbors,
                             std::size_t t, const TimeEncoder& enc);
/// Same, reading agent i and its neighborhood from `history`, which must
/// hold every referenced node including step t.
Tensor2 build_feature_matrix(const TemporalGraph& graph, const NodeHistory& history,
                             std::size_t agent, const TimeEncoder& enc);

struct AttentionResult {
  Tensor2 message;              // 1 × d_h
  std::vector<double> weights;  // one per neighbor row
};

/// Single-head attention of Z's first row over the remaining rows. A
/// self-only Z yields a zero message.
AttentionResult temporal_attention(const TgatParams& params, const Tensor2& z);

/// ReLU([m ∥ o]W_0 + b_0)W_1 + b_1 on 1-row inputs.
Tensor2 fuse(const TgatParams& params, const Tensor2& message, const Tensor2& observation);

/// Per-query softmax attention over contiguous key segments. Segment s covers
/// key rows [offsets[s], offsets[s+1]); empty segments give zero rows.
/// `weights`, when given, receives the attention weight of every key row.
Var segment_attention(Tape& tape, const Var& query, const Var& keys, const Var& values,
                      std::span<const std::size_t> offsets, std::vector<double>* weights = nullptr);

/// Where one neighbor row of the stacked neighborhoods comes from.
struct NeighborRow {
  std::size_t source = 0;  // index into [current rows ; history rows]
  std::size_t delta = 0;   // t − τ
  std::size_t group = 0;   // batch element
  std::optional<AgentPair> static_pair;  // set for τ = t rows of static edges
};

/// Neighborhoods of B groups of N agents at one step, stacked agent-major.
struct NeighborhoodLayout {
  std::size_t n_agents = 0;
  std::size_t n_current = 0;  // B·N current rows lead the source pool
  Tensor2 history;            // constant rows appended after the current rows
  std::vector<NeighborRow> rows;
  std::vector<std::size_t> offsets;  // B·N + 1

  /// Flat indices into the stacked (B·N)×N attention matrix for every row
  /// that carries a static edge.
  std::vector<tgraph::PairIndex> static_pair_indices() const;
};

NeighborhoodLayout layout_neighborhoods(std::span<const TemporalGraph> graphs,
                                        std::span<const NodeHistory* const> histories);

/// Batched encoder: `current` is (B·N)×d_0, `observations` (B·N)×obs.
/// `gates` (rows×1, optional) multiplies the value rows. Returns (B·N)×embed.
Var encode(Tape& tape, const TgatParams& params, const NeighborhoodLayout& layout,
           const Var& current, const Var& observations, const Var& gates = {},
           std::vector<double>* weights = nullptr);

/// h_i(t) for every agent of one graph, in agent order (N × embed).
Tensor2 encode_all(const TemporalGraph& graph, const NodeHistory& history,
                   const Tensor2& current, const Tensor2& observations, const TgatParams& params);

}  // namespace tiger::tgat
