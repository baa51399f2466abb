#include "tiger/tgat/encoder.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tiger/diff/ops.hpp"

namespace tiger::tgat {

TimeEncoder::TimeEncoder(std::size_t d_time)
    : frequency(Var::parameter(Tensor2(1, d_time))), phase(Var::parameter(Tensor2(1, d_time))) {
  if (d_time == 0) throw DimensionError("time encoder needs d_T >= 1");
  auto& w = frequency.mutable_value();
  for (std::size_t k = 0; k < d_time; ++k) {
    const double exponent = d_time == 1 ? 0.0 : 9.0 * double(k) / double(d_time - 1);
    w[k] = std::pow(10.0, -exponent);
  }
}

Var TimeEncoder::operator()(Tape& tape, const Var& deltas) const {
  if (deltas.cols() != 1) {
    throw DimensionError(fmt::format("time encoder: deltas {} must be a column", deltas.value().shape_string()));
  }
  return diff::cos(tape, diff::add_row(tape, diff::matmul(tape, deltas, frequency), phase));
}

void TimeEncoder::collect(diff::ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".frequency", frequency});
  out.push_back({prefix + ".phase", phase});
}

std::vector<double> time_encode(const TimeEncoder& enc, std::size_t delta_t) {
  std::vector<double> out(enc.dim());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::cos(enc.frequency.value()[k] * double(delta_t) + enc.phase.value()[k]);
  }
  return out;
}

TgatParams::TgatParams(std::size_t node_dim, std::size_t obs_dim, Rng& rng, const TgatDims& dims)
    : time(dims.time),
      w_query(Var::parameter(diff::uniform_init(node_dim + dims.time, dims.latent, rng))),
      w_key(Var::parameter(diff::uniform_init(node_dim + dims.time, dims.latent, rng))),
      w_value(Var::parameter(diff::uniform_init(node_dim + dims.time, dims.latent, rng))),
      fuse_hidden(dims.latent + obs_dim, dims.fusion_hidden, rng),
      fuse_out(dims.fusion_hidden, dims.embed, rng) {}

void TgatParams::collect(diff::ParamList& out, const std::string& prefix) const {
  time.collect(out, prefix + ".time");
  out.push_back({prefix + ".query", w_query});
  out.push_back({prefix + ".key", w_key});
  out.push_back({prefix + ".value", w_value});
  fuse_hidden.collect(out, prefix + ".fuse0");
  fuse_out.collect(out, prefix + ".fuse1");
}

void NodeHistory::push(Tensor2 step_embeddings) {
  if (step_embeddings.rows() != n_agents_ || step_embeddings.cols() != dim_) {
    throw DimensionError(fmt::format("history step {} expected {}", step_embeddings.shape_string(),
                                     diff::shape_string(n_agents_, dim_)));
  }
  steps_.push_back(std::move(step_embeddings));
}

bool NodeHistory::contains(const NodeRef& node) const noexcept {
  return node.time < steps_.size() && node.agent < n_agents_;
}

std::span<const double> NodeHistory::at(const NodeRef& node) const {
  if (!contains(node)) {
    throw ConsistencyError(fmt::format("node (agent {}, t {}) missing from history of {} steps",
                                       node.agent, node.time, steps_.size()));
  }
  return steps_[node.time].row_span(node.agent);
}

Tensor2 build_feature_matrix(std::span<const double> self_embed,
                             std::span<const std::pair<std::span<const double>, std::size_t>> neighbors,
                             std::size_t t, const TimeEncoder& enc) {
  const std::size_t d0 = self_embed.size();
  const std::size_t dt = enc.dim();
  Tensor2 z(1 + neighbors.size(), d0 + dt);
  auto write_row = [&](std::size_t r, std::span<const double> h, std::size_t delta) {
    if (h.size() != d0) {
      throw DimensionError(fmt::format("feature row {} has width {}, expected {}", r, h.size(), d0));
    }
    std::copy(h.begin(), h.end(), z.row_span(r).begin());
    const auto phi = time_encode(enc, delta);
    std::copy(phi.begin(), phi.end(), z.row_span(r).begin() + d0);
  };
  write_row(0, self_embed, 0);
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const auto& [h, tau] = neighbors[k];
    if (tau > t) throw DomainError(fmt::format("neighbor time {} lies after t = {}", tau, t));
    write_row(k + 1, h, t - tau);
  }
  return z;
}

Tensor2 build_feature_matrix(const TemporalGraph& graph, const NodeHistory& history,
                             std::size_t agent, const TimeEncoder& enc) {
  std::vector<std::pair<std::span<const double>, std::size_t>> nbrs;
  for (const auto& node : graph.neighborhood(agent)) nbrs.emplace_back(history.at(node), node.time);
  return build_feature_matrix(history.at({agent, graph.t}), nbrs, graph.t, enc);
}

namespace {

void check_projection(const TgatParams& params, const Tensor2& z) {
  if (z.rows() < 1 || z.cols() != params.w_query.rows()) {
    throw DimensionError(fmt::format("feature matrix {} does not fit projections {}", z.shape_string(),
                                     params.w_query.value().shape_string()));
  }
}

}  // namespace

AttentionResult temporal_attention(const TgatParams& params, const Tensor2& z) {
  check_projection(params, z);
  Tape tape;
  const std::vector<std::size_t> self_row{0};
  std::vector<std::size_t> rest(z.rows() - 1);
  for (std::size_t k = 0; k < rest.size(); ++k) rest[k] = k + 1;
  const Var zv = Var::constant(z);
  const Var q = diff::matmul(tape, diff::gather_rows(tape, zv, self_row), params.w_query);
  AttentionResult out;
  if (rest.empty()) {
    out.message = Tensor2(1, params.latent_dim());
    return out;
  }
  const Var nb = diff::gather_rows(tape, zv, rest);
  const std::vector<std::size_t> offsets{0, rest.size()};
  out.message = segment_attention(tape, q, diff::matmul(tape, nb, params.w_key),
                                  diff::matmul(tape, nb, params.w_value), offsets, &out.weights)
                    .value();
  return out;
}

Tensor2 fuse(const TgatParams& params, const Tensor2& message, const Tensor2& observation) {
  Tape tape;
  const std::vector<Var> parts{Var::constant(message), Var::constant(observation)};
  const Var x = diff::concat_cols(tape, parts);
  if (x.cols() != params.fuse_hidden.in_dim()) {
    throw DimensionError(fmt::format("fuse input {} but fusion expects width {}", x.value().shape_string(),
                                     params.fuse_hidden.in_dim()));
  }
  return params.fuse_out(tape, diff::relu(tape, params.fuse_hidden(tape, x))).value();
}

Var segment_attention(Tape& tape, const Var& query, const Var& keys, const Var& values,
                      std::span<const std::size_t> offsets, std::vector<double>* weights) {
  const std::size_t segs = query.rows();
  const std::size_t d = query.cols();
  const std::size_t m = keys.rows();
  if (offsets.size() != segs + 1 || offsets.front() != 0 || offsets.back() != m || keys.cols() != d ||
      values.rows() != m) {
    throw DimensionError(fmt::format("segment attention: query {}, keys {}, values {}, {} offsets",
                                     query.value().shape_string(), keys.value().shape_string(),
                                     values.value().shape_string(), offsets.size()));
  }
  const std::size_t dv = values.cols();
  const auto& Q = query.value();
  const auto& K = keys.value();
  const auto& V = values.value();
  std::vector<double> alpha(m, 0.0);
  Tensor2 out(segs, dv);
  std::vector<double> logits;
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (hi < lo) throw DimensionError("segment attention: offsets must be nondecreasing");
    if (hi == lo) continue;
    logits.assign(hi - lo, 0.0);
    for (std::size_t j = lo; j < hi; ++j) {
      for (std::size_t c = 0; c < d; ++c) logits[j - lo] += Q(s, c) * K(j, c);
    }
    const auto a = diff::softmax(logits);
    for (std::size_t j = lo; j < hi; ++j) {
      alpha[j] = a[j - lo];
      for (std::size_t c = 0; c < dv; ++c) out(s, c) += alpha[j] * V(j, c);
    }
  }
  if (weights) *weights = alpha;
  Var result(std::move(out), query.requires_grad() || keys.requires_grad() || values.requires_grad());
  if (result.requires_grad()) {
    tape.record([qn = query.node(), kn = keys.node(), vn = values.node(), on = result.node(),
                 alpha = std::move(alpha), off = std::vector<std::size_t>(offsets.begin(), offsets.end())] {
      if (on->grad.empty()) return;
      const auto& Q = qn->value;
      const auto& K = kn->value;
      const auto& V = vn->value;
      const auto& G = on->grad;
      const std::size_t d = Q.cols(), dv = V.cols();
      std::vector<double> dalpha;
      for (std::size_t s = 0; s + 1 < off.size(); ++s) {
        const std::size_t lo = off[s], hi = off[s + 1];
        if (hi == lo) continue;
        dalpha.assign(hi - lo, 0.0);
        double mean = 0.0;
        for (std::size_t j = lo; j < hi; ++j) {
          for (std::size_t c = 0; c < dv; ++c) dalpha[j - lo] += G(s, c) * V(j, c);
          mean += alpha[j] * dalpha[j - lo];
        }
        if (vn->requires_grad) {
          auto& gv = vn->grad_buffer();
          for (std::size_t j = lo; j < hi; ++j) {
            for (std::size_t c = 0; c < dv; ++c) gv(j, c) += alpha[j] * G(s, c);
          }
        }
        for (std::size_t j = lo; j < hi; ++j) {
          const double de = alpha[j] * (dalpha[j - lo] - mean);
          if (qn->requires_grad) {
            auto& gq = qn->grad_buffer();
            for (std::size_t c = 0; c < d; ++c) gq(s, c) += de * K(j, c);
          }
          if (kn->requires_grad) {
            auto& gk = kn->grad_buffer();
            for (std::size_t c = 0; c < d; ++c) gk(j, c) += de * Q(s, c);
          }
        }
      }
    });
  }
  return result;
}

std::vector<tgraph::PairIndex> NeighborhoodLayout::static_pair_indices() const {
  std::vector<tgraph::PairIndex> out;
  out.reserve(rows.size());
  const std::size_t n = n_agents;
  for (const auto& r : rows) {
    if (!r.static_pair) {
      out.emplace_back(std::nullopt);
      continue;
    }
    const auto [i, j] = *r.static_pair;
    const std::size_t base = r.group * n;
    out.emplace_back(std::pair{(base + i) * n + j, (base + j) * n + i});
  }
  return out;
}

NeighborhoodLayout layout_neighborhoods(std::span<const TemporalGraph> graphs,
                                        std::span<const NodeHistory* const> histories) {
  if (graphs.size() != histories.size()) {
    throw DimensionError(fmt::format("{} graphs but {} histories", graphs.size(), histories.size()));
  }
  NeighborhoodLayout layout;
  if (graphs.empty()) {
    layout.offsets.push_back(0);
    return layout;
  }
  const std::size_t n = graphs.front().n_agents;
  const std::size_t dim = histories.front()->dim();
  layout.n_agents = n;
  layout.n_current = n * graphs.size();
  layout.offsets.reserve(layout.n_current + 1);
  layout.offsets.push_back(0);
  std::vector<double> hist;
  std::size_t hist_rows = 0;
  for (std::size_t b = 0; b < graphs.size(); ++b) {
    const auto& g = graphs[b];
    const auto& h = *histories[b];
    if (g.n_agents != n || h.dim() != dim) {
      throw DimensionError(fmt::format("batch element {} has {} agents / width {}, expected {} / {}", b,
                                       g.n_agents, h.dim(), n, dim));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& node : g.neighborhood(i)) {
        NeighborRow row;
        row.group = b;
        row.delta = g.t - node.time;
        if (node.time == g.t) {
          row.source = b * n + node.agent;
          row.static_pair = AgentPair{std::min(i, node.agent), std::max(i, node.agent)};
        } else {
          const auto emb = h.at(node);
          hist.insert(hist.end(), emb.begin(), emb.end());
          row.source = layout.n_current + hist_rows++;
        }
        layout.rows.push_back(row);
      }
      layout.offsets.push_back(layout.rows.size());
    }
  }
  layout.history = Tensor2(hist_rows, dim, std::move(hist));
  return layout;
}

Var encode(Tape& tape, const TgatParams& params, const NeighborhoodLayout& layout, const Var& current,
           const Var& observations, const Var& gates, std::vector<double>* weights) {
  const std::size_t n_rows = layout.n_current;
  if (current.rows() != n_rows || current.cols() != params.node_dim() || observations.rows() != n_rows) {
    throw DimensionError(fmt::format("encode: current {} / observations {} for {} rows of width {}",
                                     current.value().shape_string(), observations.value().shape_string(),
                                     n_rows, params.node_dim()));
  }
  const Var zero_delta = Var::constant(Tensor2(n_rows, 1));
  const std::vector<Var> self_parts{current, params.time(tape, zero_delta)};
  const Var query = diff::matmul(tape, diff::concat_cols(tape, self_parts), params.w_query);

  Var message;
  if (layout.rows.empty()) {
    message = Var::constant(Tensor2(n_rows, params.latent_dim()));
    if (weights) weights->clear();
  } else {
    Var pool = current;
    if (layout.history.rows() > 0) {
      const std::vector<Var> pool_parts{current, Var::constant(layout.history)};
      pool = diff::concat_rows(tape, pool_parts);
    }
    std::vector<std::size_t> src(layout.rows.size());
    Tensor2 deltas(layout.rows.size(), 1);
    for (std::size_t r = 0; r < src.size(); ++r) {
      src[r] = layout.rows[r].source;
      deltas[r] = double(layout.rows[r].delta);
    }
    const std::vector<Var> nb_parts{diff::gather_rows(tape, pool, src),
                                    params.time(tape, Var::constant(std::move(deltas)))};
    const Var z = diff::concat_cols(tape, nb_parts);
    Var values = diff::matmul(tape, z, params.w_value);
    if (gates.defined()) values = diff::scale_rows(tape, values, gates);
    message = segment_attention(tape, query, diff::matmul(tape, z, params.w_key), values, layout.offsets,
                                weights);
  }
  const std::vector<Var> fuse_parts{message, observations};
  const Var x = diff::concat_cols(tape, fuse_parts);
  if (x.cols() != params.fuse_hidden.in_dim()) {
    throw DimensionError(fmt::format("fuse input {} but fusion expects width {}", x.value().shape_string(),
                                     params.fuse_hidden.in_dim()));
  }
  return params.fuse_out(tape, diff::relu(tape, params.fuse_hidden(tape, x)));
}

Tensor2 encode_all(const TemporalGraph& graph, const NodeHistory& history, const Tensor2& current,
                   const Tensor2& observations, const TgatParams& params) {
  const std::vector<TemporalGraph> graphs{graph};
  const std::vector<const NodeHistory*> hist{&history};
  const auto layout = layout_neighborhoods(graphs, hist);
  Tape tape;
  return encode(tape, params, layout, Var::constant(current), Var::constant(observations)).value();
}

}  // namespace tiger::tgat
