#include "tiger/tgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tiger/diff/nn.hpp"
#include "tiger/diff/ops.hpp"

namespace tiger::tgraph {

void GraphParams::validate() const {
  if (!(k_stat_nbr >= 0.0 && k_stat_nbr <= 1.0)) {
    throw ConfigError(fmt::format("k_stat_nbr must lie in [0, 1], got {}", k_stat_nbr));
  }
}

std::size_t pair_count(std::size_t n_agents) {
  return n_agents < 2 ? 0 : n_agents * (n_agents - 1) / 2;
}

std::size_t static_edge_count(std::size_t n_agents, double k_stat_nbr) {
  const double pairs = static_cast<double>(pair_count(n_agents));
  const double kept = std::ceil(k_stat_nbr * pairs - 1e-9);
  return static_cast<std::size_t>(std::clamp(kept, 0.0, pairs));
}

std::vector<std::size_t> TemporalGraph::static_neighbors(std::size_t agent) const {
  std::vector<std::size_t> out;
  for (const auto& [a, b] : static_edges) {
    if (a == agent) out.push_back(b);
    if (b == agent) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeRef> TemporalGraph::neighborhood(std::size_t agent) const {
  std::vector<NodeRef> out;
  for (std::size_t j : static_neighbors(agent)) out.push_back({j, t});
  for (const auto* edges : {&self_history_edges, &nbr_history_edges}) {
    for (const auto& e : *edges) {
      if (e.from.agent == agent) out.push_back(e.to);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

GatScorer::GatScorer(std::size_t feature_dim, std::size_t proj_dim, Rng& rng)
    : weight(Var::parameter(diff::uniform_init(feature_dim, proj_dim, rng))),
      attention(Var::parameter(diff::uniform_init(2 * proj_dim, 1, rng))) {}

void GatScorer::collect(diff::ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".attention", attention});
}

namespace {

// α for every ordered pair inside each group of n rows of the projected
// features `proj`; diagonal entries stay zero.
Var pair_attention(Tape& tape, const Var& proj, const Var& attn_vec, std::size_t n) {
  const std::size_t rows = proj.rows();
  const std::size_t d = proj.cols();
  if (n < 2) throw DomainError("edge scoring needs at least two agents");
  if (rows % n != 0 || attn_vec.rows() != 2 * d || attn_vec.cols() != 1) {
    throw DimensionError(fmt::format("gat: features {} / attention {} for groups of {}",
                                     proj.value().shape_string(), attn_vec.value().shape_string(), n));
  }
  const auto& P = proj.value();
  const auto& a = attn_vec.value();
  std::vector<double> u(rows, 0.0), v(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      u[r] += P(r, c) * a[c];
      v[r] += P(r, c) * a[d + c];
    }
  }
  Tensor2 alpha(rows, n);
  std::vector<double> logits(n - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r - r % n;
    const std::size_t i = r % n;
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) logits[k++] = diff::leaky_relu(u[r] + v[base + j]);
    }
    const auto s = diff::softmax(logits);
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) alpha(r, j) = s[k++];
    }
  }
  Var out(std::move(alpha), proj.requires_grad() || attn_vec.requires_grad());
  if (out.requires_grad()) {
    tape.record([pn = proj.node(), an = attn_vec.node(), on = out.node(), u = std::move(u),
                 v = std::move(v), n, d] {
      if (on->grad.empty()) return;
      const std::size_t rows = on->value.rows();
      std::vector<double> du(rows, 0.0), dv(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r - r % n;
        const std::size_t i = r % n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += on->value(r, j) * on->grad(r, j);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double de = on->value(r, j) * (on->grad(r, j) - dot);
          const double pre = u[r] + v[base + j];
          const double dpre = de * (pre >= 0.0 ? 1.0 : diff::kLeakySlope);
          du[r] += dpre;
          dv[base + j] += dpre;
        }
      }
      const auto& P = pn->value;
      const auto& a = an->value;
      if (pn->requires_grad) {
        auto& g = pn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) g(r, c) += du[r] * a[c] + dv[r] * a[d + c];
        }
      }
      if (an->requires_grad) {
        auto& g = an->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            g[c] += du[r] * P(r, c);
            g[d + c] += dv[r] * P(r, c);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Var GatScorer::operator()(Tape& tape, const Var& feats, std::size_t n_agents) const {
  if (feats.cols() != feature_dim()) {
    throw DimensionError(fmt::format("gat: features {} but scorer expects width {}",
                                     feats.value().shape_string(), feature_dim()));
  }
  return pair_attention(tape, diff::matmul(tape, feats, weight), attention, n_agents);
}

Tensor2 score_edges(const GatScorer& scorer, const Tensor2& node_feats) {
  if (node_feats.rows() < 2) throw DomainError("edge scoring needs at least two agents");
  Tape tape;
  return scorer(tape, Var::constant(node_feats), node_feats.rows()).value();
}

std::vector<AgentPair> prune_topk(const Tensor2& attn, double k_stat_nbr) {
  return prune_topk(attn, 0, k_stat_nbr);
}

std::vector<AgentPair> prune_topk(const Tensor2& attn, std::size_t row_offset, double k_stat_nbr) {
  const std::size_t n = attn.cols();
  if (row_offset + n > attn.rows()) {
    throw DimensionError(fmt::format("prune_topk: rows [{}, {}) outside {}", row_offset,
                                     row_offset + n, attn.shape_string()));
  }
  struct Scored {
    double score;
    AgentPair pair;
  };
  std::vector<Scored> pairs;
  pairs.reserve(pair_count(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pairs.push_back({0.5 * (attn(row_offset + i, j) + attn(row_offset + j, i)), {i, j}});
    }
  }
  const std::size_t keep = static_edge_count(n, k_stat_nbr);
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<AgentPair> out;
  out.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) out.push_back(pairs[k].pair);
  std::sort(out.begin(), out.end());
  return out;
}

TemporalGraph build_temporal_neighborhood(std::span<const AgentPair> static_edges,
                                          std::size_t n_agents, std::size_t t,
                                          const GraphParams& params) {
  TemporalGraph g;
  g.t = t;
  g.n_agents = n_agents;
  g.static_edges.assign(static_edges.begin(), static_edges.end());
  for (auto& e : g.static_edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
    if (e.second >= n_agents || e.first == e.second) {
      throw DomainError(fmt::format("static edge ({}, {}) invalid for {} agents", e.first,
                                    e.second, n_agents));
    }
  }
  std::sort(g.static_edges.begin(), g.static_edges.end());

  const std::size_t self_depth = std::min(params.k_past_self, t);
  const std::size_t nbr_depth = std::min(params.k_past_nbr, t);
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (std::size_t dt = 1; dt <= self_depth; ++dt) {
      g.self_history_edges.push_back({{i, t}, {i, t - dt}});
    }
  }
  for (const auto& [a, b] : g.static_edges) {
    for (std::size_t dt = 1; dt <= nbr_depth; ++dt) {
      g.nbr_history_edges.push_back({{a, t}, {b, t - dt}});
      g.nbr_history_edges.push_back({{b, t}, {a, t - dt}});
    }
  }
  std::sort(g.nbr_history_edges.begin(), g.nbr_history_edges.end());

  for (std::size_t i = 0; i < n_agents; ++i) g.nodes.push_back({i, t});
  for (const auto* edges : {&g.self_history_edges, &g.nbr_history_edges}) {
    for (const auto& e : *edges) g.nodes.push_back(e.to);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  return g;
}

Var static_edge_gates(Tape& tape, const Var& attn, std::span<const PairIndex> pairs) {
  Var out(Tensor2(pairs.size(), 1, 1.0), attn.requires_grad());
  if (out.requires_grad()) {
    tape.record([an = attn.node(), on = out.node(),
                 idx = std::vector<PairIndex>(pairs.begin(), pairs.end())] {
      if (on->grad.empty()) return;
      auto g = an->grad_buffer().flat();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (!idx[r]) continue;
        g[idx[r]->first] += 0.5 * on->grad[r];
        g[idx[r]->second] += 0.5 * on->grad[r];
      }
    });
  }
  return out;
}

}  // namespace tiger::tgraph
