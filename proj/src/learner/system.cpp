#include "tiger/learner/system.hpp"

#include <fmt/format.h>

#include "tiger/diff/ops.hpp"
#include "tiger/errors.hpp"

namespace tiger::learner {

Networks::Networks(marl::Algorithm algo, std::size_t agents, std::size_t obs_dim, std::size_t n_actions,
                   std::size_t state, Rng& rng, const ModelDims& dims)
    : algorithm(algo), n_agents(agents), state_dim(state) {
  if (agents == 0) throw ConfigError("need at least one agent");
  const bool graph = uses_graph();
  agent = marl::AgentNet(obs_dim, n_actions, graph ? dims.tgat.embed : 0, rng, dims.gru_hidden);
  if (graph) {
    scorer = tgraph::GatScorer(dims.gru_hidden, dims.gat_proj, rng);
    encoder = tgat::TgatParams(dims.gru_hidden, obs_dim, rng, dims.tgat);
  }
  if (algo == marl::Algorithm::qmix) mixer = marl::Mixer(agents, state, rng, dims.mixer);
  if (graph) mixer = marl::Mixer(agents, state + agents * dims.tgat.embed, rng, dims.mixer);
}

void Networks::collect(diff::ParamList& out) const {
  agent.collect(out, "agent");
  if (uses_graph()) {
    scorer.collect(out, "gat");
    encoder.collect(out, "tgat");
  }
  if (algorithm != marl::Algorithm::vdn) mixer.collect(out, "mixer");
}

Networks Networks::frozen_copy() const {
  Networks copy = *this;
  diff::ParamList src, dst;
  collect(src);
  // Re-point every handle of the copy at a fresh constant node.
  auto refresh = [](Var& v) { v = Var::constant(v.value()); };
  auto refresh_linear = [&](diff::Linear& l) {
    refresh(l.weight);
    refresh(l.bias);
  };
  refresh_linear(copy.agent.encoder);
  for (auto* g : {&copy.agent.gru_lower, &copy.agent.gru_upper}) {
    refresh_linear(g->input);
    refresh_linear(g->hidden);
  }
  refresh_linear(copy.agent.q_head);
  if (uses_graph()) {
    refresh(copy.scorer.weight);
    refresh(copy.scorer.attention);
    refresh(copy.encoder.time.frequency);
    refresh(copy.encoder.time.phase);
    refresh(copy.encoder.w_query);
    refresh(copy.encoder.w_key);
    refresh(copy.encoder.w_value);
    refresh_linear(copy.encoder.fuse_hidden);
    refresh_linear(copy.encoder.fuse_out);
  }
  if (algorithm != marl::Algorithm::vdn) {
    for (auto* l : {&copy.mixer.hyper_w1_hidden, &copy.mixer.hyper_w1_out, &copy.mixer.hyper_b1,
                    &copy.mixer.hyper_w2_hidden, &copy.mixer.hyper_w2_out, &copy.mixer.value_hidden,
                    &copy.mixer.value_out}) {
      refresh_linear(*l);
    }
  }
  copy.collect(dst);
  if (src.size() != dst.size()) throw ConsistencyError("frozen copy lost parameters");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k].var.node() == dst[k].var.node()) {
      throw ConsistencyError(fmt::format("frozen copy shares parameter {}", src[k].name));
    }
  }
  return copy;
}

void copy_parameters(const Networks& from, Networks& to) {
  diff::ParamList src, dst;
  from.collect(src);
  to.collect(dst);
  if (src.size() != dst.size()) throw ConsistencyError("parameter sets differ in size");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (!src[k].var.value().same_shape(dst[k].var.value()) || src[k].name != dst[k].name) {
      throw ConsistencyError(fmt::format("parameter {} does not match {}", src[k].name, dst[k].name));
    }
    dst[k].var.mutable_value() = src[k].var.value();
  }
}

UnrollState start_unroll(const Networks& nets, std::size_t batch) {
  UnrollState s;
  s.hidden = nets.agent.initial_hidden(batch * nets.n_agents);
  if (nets.uses_graph()) s.histories.assign(batch, tgat::NodeHistory(nets.n_agents, nets.agent.hidden_dim()));
  return s;
}

StepOutput forward_step(Tape& tape, const Networks& nets, const tgraph::GraphParams& graph, UnrollState& state,
                        const Var& observations, std::size_t t,
                        const std::vector<std::vector<tgraph::AgentPair>>* fixed_edges) {
  StepOutput out;
  const std::size_t n = nets.n_agents;
  state.hidden = nets.agent.recur(tape, observations, state.hidden);
  const Var& base = state.hidden.upper;
  if (!nets.uses_graph()) {
    out.q_values = nets.agent.q_values(tape, base);
    return out;
  }
  const std::size_t batch = state.histories.size();
  if (base.rows() != batch * n) {
    throw DimensionError(fmt::format("unroll holds {} episodes of {} agents but got {} rows", batch, n,
                                     base.rows()));
  }
  Var attn;
  // The scorer sees the hiddens as constants: its straight-through gradient
  // trains the scorer only and never reaches the recurrent layers.
  if (n >= 2) attn = nets.scorer(tape, diff::detach(base), n);
  if (fixed_edges && fixed_edges->size() != batch) {
    throw DimensionError(fmt::format("{} fixed edge lists for {} episodes", fixed_edges->size(), batch));
  }
  out.graphs.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<tgraph::AgentPair> edges;
    if (fixed_edges) {
      edges = (*fixed_edges)[b];
    } else if (n >= 2) {
      edges = tgraph::prune_topk(attn.value(), b * n, graph.k_stat_nbr);
    }
    out.graphs.push_back(tgraph::build_temporal_neighborhood(edges, n, t, graph));
  }
  std::vector<const tgat::NodeHistory*> hist;
  for (const auto& h : state.histories) hist.push_back(&h);
  const auto layout = tgat::layout_neighborhoods(out.graphs, hist);
  Var gates;
  if (attn.defined()) {
    const auto pairs = layout.static_pair_indices();
    gates = tgraph::static_edge_gates(tape, attn, pairs);
  }
  out.embeddings = tgat::encode(tape, nets.encoder, layout, base, observations, gates);
  out.q_values = nets.agent.q_values(tape, base, out.embeddings);

  const auto& h = base.value();
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor2 rows(n, h.cols());
    std::copy(h.flat().begin() + long(b * n * h.cols()), h.flat().begin() + long((b + 1) * n * h.cols()),
              rows.flat().begin());
    state.histories[b].push(std::move(rows));
  }
  return out;
}

Var mix(Tape& tape, const Networks& nets, const Var& chosen, const Var& states, const Var& embeddings) {
  switch (nets.algorithm) {
    case marl::Algorithm::vdn: return marl::vdn_mix(tape, chosen);
    case marl::Algorithm::qmix: return marl::qmix_mix(tape, nets.mixer, chosen, states);
    case marl::Algorithm::tiger_mix: return marl::tiger_mix(tape, nets.mixer, chosen, states, embeddings);
  }
  throw ConsistencyError("unknown algorithm");
}

}  // namespace tiger::learner
