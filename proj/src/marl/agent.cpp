#include "tiger/marl/agent.hpp"

#include <fmt/format.h>

#include "tiger/diff/ops.hpp"
#include "tiger/errors.hpp"

namespace tiger::marl {

AgentNet::AgentNet(std::size_t obs_dim, std::size_t n_actions, std::size_t embed_dim, Rng& rng,
                   std::size_t hidden)
    : encoder(obs_dim, hidden, rng),
      gru_lower(hidden, hidden, rng),
      gru_upper(hidden, hidden, rng),
      q_head(hidden + embed_dim, n_actions, rng) {}

AgentHidden AgentNet::initial_hidden(std::size_t rows) const {
  return {Var::constant(Tensor2(rows, hidden_dim())), Var::constant(Tensor2(rows, hidden_dim()))};
}

AgentHidden AgentNet::recur(Tape& tape, const Var& obs, const AgentHidden& prev) const {
  if (obs.cols() != obs_dim()) {
    throw DimensionError(fmt::format("agent: observation {} but encoder expects width {}",
                                     obs.value().shape_string(), obs_dim()));
  }
  const Var x = diff::relu(tape, encoder(tape, obs));
  const Var lower = gru_lower(tape, x, prev.lower);
  return {lower, gru_upper(tape, lower, prev.upper)};
}

Var AgentNet::q_values(Tape& tape, const Var& upper, const Var& embedding) const {
  if (embed_dim() == 0) {
    if (embedding.defined()) throw DimensionError("agent: embedding given to a net without an embedding input");
    return q_head(tape, upper);
  }
  if (!embedding.defined() || embedding.rows() != upper.rows() || embedding.cols() != embed_dim()) {
    throw DimensionError(fmt::format("agent: Q-head needs an embedding of width {} per row", embed_dim()));
  }
  const std::vector<Var> parts{upper, embedding};
  return q_head(tape, diff::concat_cols(tape, parts));
}

void AgentNet::collect(diff::ParamList& out, const std::string& prefix) const {
  encoder.collect(out, prefix + ".encoder");
  gru_lower.collect(out, prefix + ".gru0");
  gru_upper.collect(out, prefix + ".gru1");
  q_head.collect(out, prefix + ".q");
}

AgentOutput agent_forward(const AgentNet& net, std::span<const double> observation,
                          const Tensor2& prev_lower, const Tensor2& prev_upper,
                          std::optional<std::span<const double>> embedding) {
  Tape tape;
  const auto h = net.recur(tape, Var::constant(Tensor2::row(observation)),
                           {Var::constant(prev_lower), Var::constant(prev_upper)});
  Var emb;
  if (embedding) emb = Var::constant(Tensor2::row(*embedding));
  const auto q = net.q_values(tape, h.upper, emb);
  return {q.value().row_vector(0), h.lower.value(), h.upper.value()};
}

int greedy_action(std::span<const double> values, const std::vector<bool>& legal) {
  if (legal.size() != values.size()) {
    throw DimensionError(fmt::format("{} action values but legal mask of {}", values.size(), legal.size()));
  }
  int best = -1;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (legal[a] && (best < 0 || values[a] > values[std::size_t(best)])) best = int(a);
  }
  if (best < 0) throw DomainError("no legal action");
  return best;
}

std::vector<int> select_actions(const Tensor2& values, double epsilon, Rng& rng,
                                const std::vector<std::vector<bool>>& legal) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError(fmt::format("epsilon {} outside [0, 1]", epsilon));
  if (legal.size() != values.rows()) {
    throw DimensionError(fmt::format("{} agents but {} legal masks", values.rows(), legal.size()));
  }
  std::vector<int> out(values.rows());
  for (std::size_t i = 0; i < values.rows(); ++i) {
    std::vector<int> allowed;
    for (std::size_t a = 0; a < legal[i].size(); ++a) {
      if (legal[i][a]) allowed.push_back(int(a));
    }
    if (allowed.empty()) throw DomainError(fmt::format("agent {} has no legal action", i));
    // The exploration draw is taken for every agent so the RNG stream does not
    // depend on the action values.
    const bool explore = rng.uniform() < epsilon;
    const std::size_t pick = rng.below(allowed.size());
    out[i] = explore ? allowed[pick] : greedy_action(values.row_span(i), legal[i]);
  }
  return out;
}

}  // namespace tiger::marl
