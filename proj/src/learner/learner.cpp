#include "tiger/learner/learner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "tiger/diff/ops.hpp"
#include "tiger/errors.hpp"

namespace tiger::learner {

namespace {

Tensor2 observation_block(const envs::EnvStepResult& r, std::size_t obs_dim) {
  Tensor2 out(r.observations.size(), obs_dim);
  for (std::size_t i = 0; i < r.observations.size(); ++i) {
    if (r.observations[i].size() != obs_dim) {
      throw DimensionError(fmt::format("agent {} observation has width {}, expected {}", i,
                                       r.observations[i].size(), obs_dim));
    }
    std::copy(r.observations[i].begin(), r.observations[i].end(), out.row_span(i).begin());
  }
  return out;
}

EpisodeBatch run_episode(const Networks& nets, const tgraph::GraphParams& graph, envs::Environment& env,
                         Rng& rng, const std::function<double(std::size_t)>& epsilon) {
  EpisodeBatch ep;
  auto res = env.reset(rng);
  auto state = start_unroll(nets, 1);
  const auto legal = env.legal_actions();
  for (std::size_t t = 0;; ++t) {
    if (t >= env.horizon()) throw ConsistencyError(fmt::format("{} ran past its horizon", env.name()));
    Tensor2 obs = observation_block(res, nets.agent.obs_dim());
    Tape tape;
    const auto out = forward_step(tape, nets, graph, state, Var::constant(obs), t);
    if (!out.graphs.empty()) ep.static_edges.push_back(out.graphs.front().static_edges);
    const double eps = epsilon(t);
    const auto actions = marl::select_actions(out.q_values.value(), eps, rng, legal);
    ep.observations.push_back(std::move(obs));
    ep.states.push_back(res.global_state);
    ep.epsilons.push_back(eps);
    res = env.step(actions);
    ep.actions.push_back(actions);
    ep.rewards.push_back(res.reward);
    if (res.terminated) {
      ep.terminated = true;
      const auto it = res.info.find("win");
      ep.win = it != res.info.end() && it->second > 0.5;
      return ep;
    }
  }
}

}  // namespace

double episode_metric(const envs::Environment& env, const EpisodeBatch& episode) {
  if (env.name() == "gather") return episode.win ? 1.0 : 0.0;
  return episode.total_reward();
}

Learner::Learner(const LearnerConfig& config, const envs::Environment& env, std::uint64_t seed)
    : config_(config), buffer_(config.buffer_capacity), rng_(derive_seed(seed, 2)) {
  config_.graph.validate();
  if (config_.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (config_.target_sync_interval == 0) throw ConfigError("target_sync_interval must be positive");
  if (!(config_.td.gamma >= 0.0 && config_.td.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(config_.td.lambda >= 0.0 && config_.td.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  Rng init(derive_seed(seed, 1));
  online_ = Networks(config_.algorithm, env.n_agents(), env.obs_dim(), env.n_actions(), env.state_dim(), init,
                     config_.dims);
  target_ = online_.frozen_copy();
  online_.collect(params_);
  adam_ = std::make_unique<diff::Adam>(config_.adam, params_);
}

EpisodeBatch Learner::collect_episode(envs::Environment& env) {
  const std::size_t base = env_steps_;
  auto ep = run_episode(online_, config_.graph, env, rng_,
                        [&](std::size_t t) { return epsilon_at(config_.epsilon, base + t); });
  env_steps_ += ep.length();
  ++episodes_;
  return ep;
}

EpisodeBatch Learner::rollout(envs::Environment& env, double epsilon, Rng& rng) const {
  return run_episode(online_, config_.graph, env, rng, [epsilon](std::size_t) { return epsilon; });
}

struct Learner::LossParts {
  Var loss;
  Tensor2 squared;  // B × L masked squared errors
  std::vector<std::size_t> lengths;
  FrozenUnroll record;
};

Learner::LossParts Learner::build_loss(Tape& tape, std::span<const EpisodeBatch* const> episodes,
                                       const FrozenUnroll* frozen) const {
  const std::size_t batch = episodes.size();
  const std::size_t n = online_.n_agents;
  const std::size_t obs_dim = online_.agent.obs_dim();
  const std::size_t sdim = online_.state_dim;
  if (batch == 0) throw DomainError("empty training batch");
  std::size_t horizon = 0;
  for (const auto* ep : episodes) {
    if (!ep->terminated || ep->length() == 0) throw DomainError("training needs complete, terminated episodes");
    horizon = std::max(horizon, ep->length());
  }

  auto online_state = start_unroll(online_, batch);
  if (frozen) {
    if (frozen->histories.size() != online_state.histories.size()) {
      throw DimensionError(fmt::format("{} frozen histories for {} episodes", frozen->histories.size(), batch));
    }
    if (frozen->greedy.size() != horizon || (online_.uses_graph() && frozen->edges.size() != horizon)) {
      throw DimensionError("frozen unroll does not cover the batch horizon");
    }
    online_state.histories = frozen->histories;
  }
  LossParts parts;
  auto target_state = start_unroll(target_, batch);
  std::vector<Var> qtot_cols;
  std::vector<std::vector<double>> next_values(batch, std::vector<double>(horizon, 0.0));
  const std::vector<bool> all_legal(online_.agent.n_actions(), true);

  for (std::size_t t = 0; t < horizon; ++t) {
    Tensor2 obs(batch * n, obs_dim);
    Tensor2 states(batch, sdim);
    std::vector<std::size_t> actions(batch * n, 0);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& ep = *episodes[b];
      if (t >= ep.length()) continue;
      const auto& o = ep.observations[t];
      std::copy(o.flat().begin(), o.flat().end(), obs.flat().begin() + long(b * n * obs_dim));
      std::copy(ep.states[t].begin(), ep.states[t].end(), states.row_span(b).begin());
      for (std::size_t i = 0; i < n; ++i) actions[b * n + i] = std::size_t(ep.actions[t][i]);
    }
    const Var obs_v = Var::constant(std::move(obs));
    const Var states_v = Var::constant(std::move(states));
    const auto on = forward_step(tape, online_, config_.graph, online_state, obs_v, t,
                                 frozen && online_.uses_graph() ? &frozen->edges[t] : nullptr);
    std::vector<std::vector<tgraph::AgentPair>> edges;
    for (const auto& g : on.graphs) edges.push_back(g.static_edges);
    parts.record.edges.push_back(std::move(edges));
    const auto tg = forward_step(tape, target_, config_.graph, target_state, obs_v, t);

    const Var chosen = diff::reshape(tape, diff::pick_cols(tape, on.q_values, actions), batch, n);
    qtot_cols.push_back(mix(tape, online_, chosen, states_v, on.embeddings));

    // Double Q: online argmax, target evaluation.
    const auto& q_on = on.q_values.value();
    std::vector<std::size_t> greedy(batch * n);
    for (std::size_t r = 0; r < batch * n; ++r) {
      greedy[r] = frozen ? frozen->greedy[t].at(r) : std::size_t(marl::greedy_action(q_on.row_span(r), all_legal));
    }
    parts.record.greedy.push_back(greedy);
    if (t > 0) {
      const auto& q_tg = tg.q_values.value();
      Tensor2 picked(batch, n);
      for (std::size_t r = 0; r < batch * n; ++r) picked[r] = q_tg(r, greedy[r]);
      const auto bootstrap = mix(tape, target_, Var::constant(std::move(picked)), states_v, tg.embeddings).value();
      for (std::size_t b = 0; b < batch; ++b) next_values[b][t - 1] = bootstrap[b];
    }
  }

  Tensor2 targets(batch, horizon), mask(batch, horizon);
  std::size_t valid = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& ep = *episodes[b];
    const std::size_t len = ep.length();
    const auto y = td_lambda_targets(ep.rewards, std::span<const double>(next_values[b]).first(len), config_.td);
    for (std::size_t t = 0; t < len; ++t) {
      targets(b, t) = y[t];
      mask(b, t) = 1.0;
    }
    valid += len;
    parts.lengths.push_back(len);
  }
  parts.record.histories = std::move(online_state.histories);
  const Var q = diff::concat_cols(tape, qtot_cols);
  const Var err = diff::mul(tape, diff::sub(tape, q, Var::constant(std::move(targets))), Var::constant(std::move(mask)));
  const Var sq = diff::mul(tape, err, err);
  parts.squared = sq.value();
  parts.loss = diff::scale(tape, diff::sum(tape, sq), 1.0 / double(valid));
  return parts;
}

double Learner::compute_gradients(std::span<const EpisodeBatch* const> episodes) {
  Tape tape;
  diff::zero_grads(params_);
  const Var loss = td_loss(tape, episodes);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    throw TrainingError(fmt::format("non-finite loss {} at train step {}", value, train_steps_));
  }
  tape.backward(loss);
  return value;
}

TrainStats Learner::train_on(std::span<const EpisodeBatch* const> episodes) {
  TrainStats stats;
  stats.loss = compute_gradients(episodes);
  stats.grad_norm = diff::clip_global_norm(params_, config_.grad_clip);
  stats.clipped_norm = diff::global_norm(params_);
  adam_->step();
  diff::zero_grads(params_);
  ++train_steps_;
  if (train_steps_ % config_.target_sync_interval == 0) sync_targets();
  return stats;
}

std::optional<TrainStats> Learner::train_step() {
  if (buffer_.size() < config_.batch_size) return std::nullopt;
  const auto idx = buffer_.sample_indices(config_.batch_size, rng_);
  std::vector<const EpisodeBatch*> eps;
  eps.reserve(idx.size());
  for (auto i : idx) eps.push_back(&buffer_[i]);
  return train_on(eps);
}

Var Learner::td_loss(Tape& tape, std::span<const EpisodeBatch* const> episodes,
                     const FrozenUnroll* frozen) const {
  return build_loss(tape, episodes, frozen).loss;
}

FrozenUnroll Learner::record_unroll(std::span<const EpisodeBatch* const> episodes) const {
  Tape tape;
  return build_loss(tape, episodes).record;
}

double Learner::loss_on(std::span<const EpisodeBatch* const> episodes) const {
  Tape tape;
  return build_loss(tape, episodes).loss.value()[0];
}

std::vector<double> Learner::per_episode_losses(std::span<const EpisodeBatch* const> episodes) const {
  Tape tape;
  const auto parts = build_loss(tape, episodes);
  std::vector<double> out(episodes.size(), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (std::size_t t = 0; t < parts.squared.cols(); ++t) out[b] += parts.squared(b, t);
    out[b] /= double(parts.lengths[b]);
  }
  return out;
}

void Learner::sync_targets() { copy_parameters(online_, target_); }

EvalResult Learner::evaluate(const envs::Environment& env, std::size_t n_episodes, std::uint64_t seed) const {
  EvalResult r;
  Rng rng(seed);
  auto local = env.clone();
  for (std::size_t k = 0; k < n_episodes; ++k) {
    r.per_episode.push_back(episode_metric(*local, rollout(*local, 0.0, rng)));
  }
  if (n_episodes == 0) return r;
  double sum = 0.0;
  for (double v : r.per_episode) sum += v;
  r.mean = sum / double(n_episodes);
  double var = 0.0;
  for (double v : r.per_episode) var += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(var / double(n_episodes));
  return r;
}

}  // namespace tiger::learner
