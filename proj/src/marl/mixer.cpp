#include "tiger/marl/mixer.hpp"

#include <numeric>

#include <fmt/format.h>

#include "tiger/diff/ops.hpp"
#include "tiger/errors.hpp"

namespace tiger::marl {

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::vdn: return "vdn";
    case Algorithm::qmix: return "qmix";
    case Algorithm::tiger_mix: return "tiger-mix";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "vdn") return Algorithm::vdn;
  if (name == "qmix") return Algorithm::qmix;
  if (name == "tiger-mix") return Algorithm::tiger_mix;
  throw ConfigError(fmt::format("unknown algorithm '{}' (expected vdn, qmix or tiger-mix)", name));
}

Mixer::Mixer(std::size_t agents, std::size_t cond, Rng& rng, const MixerDims& dims)
    : hyper_w1_hidden(cond, dims.hyper_hidden, rng),
      hyper_w1_out(dims.hyper_hidden, agents * dims.embed, rng),
      hyper_b1(cond, dims.embed, rng),
      hyper_w2_hidden(cond, dims.hyper_hidden, rng),
      hyper_w2_out(dims.hyper_hidden, dims.embed, rng),
      value_hidden(cond, dims.embed, rng),
      value_out(dims.embed, 1, rng),
      n_agents(agents) {}

Var Mixer::operator()(Tape& tape, const Var& q, const Var& cond) const {
  if (q.cols() != n_agents || cond.cols() != cond_dim() || q.rows() != cond.rows()) {
    throw DimensionError(fmt::format("mixer: q {} and conditioning {} for {} agents / width {}",
                                     q.value().shape_string(), cond.value().shape_string(), n_agents,
                                     cond_dim()));
  }
  using namespace diff;
  const Var w1 = abs(tape, hyper_w1_out(tape, relu(tape, hyper_w1_hidden(tape, cond))));
  const Var b1 = hyper_b1(tape, cond);
  const Var w2 = abs(tape, hyper_w2_out(tape, relu(tape, hyper_w2_hidden(tape, cond))));
  const Var v = value_out(tape, relu(tape, value_hidden(tape, cond)));
  const Var hidden = elu(tape, add(tape, batched_vecmat(tape, q, w1, embed_dim()), b1));
  return add(tape, batched_vecmat(tape, hidden, w2, 1), v);
}

void Mixer::collect(diff::ParamList& out, const std::string& prefix) const {
  hyper_w1_hidden.collect(out, prefix + ".hyper_w1.0");
  hyper_w1_out.collect(out, prefix + ".hyper_w1.1");
  hyper_b1.collect(out, prefix + ".hyper_b1");
  hyper_w2_hidden.collect(out, prefix + ".hyper_w2.0");
  hyper_w2_out.collect(out, prefix + ".hyper_w2.1");
  value_hidden.collect(out, prefix + ".value.0");
  value_out.collect(out, prefix + ".value.1");
}

Var vdn_mix(Tape& tape, const Var& q) { return diff::sum_cols(tape, q); }

double vdn_mix(std::span<const double> q) { return std::accumulate(q.begin(), q.end(), 0.0); }

Var qmix_mix(Tape& tape, const Mixer& mixer, const Var& q, const Var& state) { return mixer(tape, q, state); }

Var tiger_mix(Tape& tape, const Mixer& mixer, const Var& q, const Var& state, const Var& embeddings) {
  const std::size_t batch = q.rows();
  if (embeddings.rows() != batch * mixer.n_agents) {
    throw DomainError(fmt::format("tiger-mix: {} embedding rows for {} episodes of {} agents", embeddings.rows(),
                                  batch, mixer.n_agents));
  }
  const Var flat = diff::reshape(tape, embeddings, batch, mixer.n_agents * embeddings.cols());
  const std::vector<Var> parts{state, flat};
  return mixer(tape, q, diff::concat_cols(tape, parts));
}

}  // namespace tiger::marl
