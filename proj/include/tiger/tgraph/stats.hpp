#pragma once

#include <cstddef>
#include <iosfwd>

#include "tiger/tgraph/graph.hpp"

namespace tiger::tgraph {

/// |N(v_i^t)| = K_past_self + K_stat·|E_t| + (K_stat·|E_t|)·K_past_nbr with
/// |E_t| = N(N-1)/2 and K_stat·|E_t| rounded up to whole edges.
std::size_t neighborhood_size(const GraphParams& params, std::size_t n_agents);

/// ⌈ln(N·T)⌉.
std::size_t log_self_history_rule(std::size_t n_agents, std::size_t horizon);

/// Size of the time-unrolled graph of one episode.
struct EpisodeGraphStats {
  std::size_t n_agents = 0;
  std::size_t horizon = 0;
  std::size_t nodes = 0;                       // N·T

  // Full connectivity, unbounded history.
  std::size_t static_edges_per_step = 0;       // N(N-1)/2
  std::size_t static_edges_total = 0;          // N(N-1)/2 · T
  std::size_t self_history_total = 0;          // N · T(T-1)/2
  std::size_t nbr_history_total = 0;           // N(N-1)/2 · T(T-1)

  // Pruned and horizon-bounded under the given parameters.
  std::size_t pruned_static_per_step = 0;
  std::size_t pruned_static_total = 0;
  std::size_t bounded_self_history_total = 0;
  std::size_t bounded_nbr_history_total = 0;

  std::size_t neighborhood_size = 0;           // literal trade-off formula
  std::size_t compact_neighborhood_claim = 0;  // N + 1
  std::size_t log_rule = 0;
};

EpisodeGraphStats episode_graph_stats(std::size_t n_agents, std::size_t horizon,
                                      const GraphParams& params);

/// Human-readable table, one "label: value" line per quantity.
void print_stats(std::ostream& os, const EpisodeGraphStats& stats, const GraphParams& params);

}  // namespace tiger::tgraph
