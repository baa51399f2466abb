#include "tiger/tgraph/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/ostream.h>

namespace tiger::tgraph {

std::size_t neighborhood_size(const GraphParams& params, std::size_t n_agents) {
  const std::size_t stat = static_edge_count(n_agents, params.k_stat_nbr);
  return params.k_past_self + stat + stat * params.k_past_nbr;
}

std::size_t log_self_history_rule(std::size_t n_agents, std::size_t horizon) {
  const std::size_t nt = n_agents * horizon;
  if (nt < 1) throw DomainError("log rule needs N·T >= 1");
  return static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(nt))));
}

EpisodeGraphStats episode_graph_stats(std::size_t n_agents, std::size_t horizon,
                                      const GraphParams& params) {
  EpisodeGraphStats s;
  const std::size_t N = n_agents;
  const std::size_t T = horizon;
  const std::size_t pairs = pair_count(N);
  s.n_agents = N;
  s.horizon = T;
  s.nodes = N * T;
  s.static_edges_per_step = pairs;
  s.static_edges_total = pairs * T;
  s.self_history_total = T == 0 ? 0 : N * T * (T - 1) / 2;
  s.nbr_history_total = T == 0 ? 0 : pairs * T * (T - 1);

  s.pruned_static_per_step = static_edge_count(N, params.k_stat_nbr);
  s.pruned_static_total = s.pruned_static_per_step * T;
  for (std::size_t t = 0; t < T; ++t) {
    s.bounded_self_history_total += N * std::min(params.k_past_self, t);
    s.bounded_nbr_history_total += 2 * s.pruned_static_per_step * std::min(params.k_past_nbr, t);
  }
  s.neighborhood_size = neighborhood_size(params, N);
  s.compact_neighborhood_claim = N + 1;
  s.log_rule = N * T >= 1 ? log_self_history_rule(N, T) : 0;
  return s;
}

void print_stats(std::ostream& os, const EpisodeGraphStats& s, const GraphParams& p) {
  fmt::print(os, "agents: {}\n", s.n_agents);
  fmt::print(os, "horizon: {}\n", s.horizon);
  fmt::print(os, "k_stat_nbr: {}\n", p.k_stat_nbr);
  fmt::print(os, "k_past_self: {}\n", p.k_past_self);
  fmt::print(os, "k_past_nbr: {}\n", p.k_past_nbr);
  fmt::print(os, "nodes: {}\n", s.nodes);
  fmt::print(os, "static_edges_per_step: {}\n", s.static_edges_per_step);
  fmt::print(os, "static_edges_per_episode: {}\n", s.static_edges_total);
  fmt::print(os, "self_history_edges_unbounded: {}\n", s.self_history_total);
  fmt::print(os, "nbr_history_edges_unbounded: {}\n", s.nbr_history_total);
  fmt::print(os, "pruned_static_edges_per_step: {}\n", s.pruned_static_per_step);
  fmt::print(os, "pruned_static_edges_per_episode: {}\n", s.pruned_static_total);
  fmt::print(os, "self_history_edges_bounded: {}\n", s.bounded_self_history_total);
  fmt::print(os, "nbr_history_edges_bounded: {}\n", s.bounded_nbr_history_total);
  fmt::print(os, "neighborhood_size_tradeoff: {}\n", s.neighborhood_size);
  fmt::print(os, "neighborhood_size_compact_claim: {}\n", s.compact_neighborhood_claim);
  fmt::print(os, "log_rule_k_past_self: {}\n", s.log_rule);
}

}  // namespace tiger::tgraph
