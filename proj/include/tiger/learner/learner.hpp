#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tiger/diff/optim.hpp"
#include "tiger/envs/env.hpp"
#include "tiger/learner/replay.hpp"
#include "tiger/learner/system.hpp"

namespace tiger::learner {

struct LearnerConfig {
  marl::Algorithm algorithm = marl::Algorithm::tiger_mix;
  tgraph::GraphParams graph;
  TdLambdaConfig td;
  Schedule epsilon;
  diff::AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 5000;
  std::size_t target_sync_interval = 200;
  double grad_clip = 10.0;
  ModelDims dims;
};

struct TrainStats {
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double clipped_norm = 0.0;
};

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population std over episodes
  std::vector<double> per_episode;
};

/// Win flag for Gather, summed reward otherwise.
double episode_metric(const envs::Environment& env, const EpisodeBatch& episode);

/// Everything discrete or detached that one online unroll decided: the base
/// embedding histories, the kept static edges per step and episode, and the
/// double-Q greedy actions per step. Replaying it makes the loss a smooth
/// function of the online parameters.
struct FrozenUnroll {
  std::vector<tgat::NodeHistory> histories;
  std::vector<std::vector<std::vector<tgraph::AgentPair>>> edges;  // [t][episode]
  std::vector<std::vector<std::size_t>> greedy;                    // [t][episode·N + agent]
};

class Learner {
 public:
  Learner(const LearnerConfig& config, const envs::Environment& env, std::uint64_t seed);

  /// Runs one episode with ε-greedy actions, ε taken from the schedule at the
  /// global step counter, and advances that counter by the episode length.
  EpisodeBatch collect_episode(envs::Environment& env);
  /// Same rollout with a fixed ε and a caller RNG; touches no learner state.
  EpisodeBatch rollout(envs::Environment& env, double epsilon, Rng& rng) const;

  /// Samples a batch and applies one update. Returns nullopt while the buffer
  /// holds fewer episodes than the batch size.
  std::optional<TrainStats> train_step();
  /// Update on an explicit list of episodes (no sampling).
  TrainStats train_on(std::span<const EpisodeBatch* const> episodes);
  /// Masked TD loss on the given episodes with the current parameters, no update.
  double loss_on(std::span<const EpisodeBatch* const> episodes) const;
  /// The same loss as a node on `tape`, differentiable in the online parameters.
  /// With `frozen`, the online unroll replays those histories, edges and greedy
  /// actions instead of its own, which makes the loss exactly the function
  /// whose gradient the update uses.
  Var td_loss(Tape& tape, std::span<const EpisodeBatch* const> episodes,
              const FrozenUnroll* frozen = nullptr) const;
  /// Records the decisions of the online unroll over the episodes.
  FrozenUnroll record_unroll(std::span<const EpisodeBatch* const> episodes) const;
  /// Zeroes, then fills the online gradients for the loss; returns the loss.
  double compute_gradients(std::span<const EpisodeBatch* const> episodes);
  /// Per-episode squared-error sums and step counts, no update.
  std::vector<double> per_episode_losses(std::span<const EpisodeBatch* const> episodes) const;

  void sync_targets();

  /// Greedy evaluation on a private RNG seeded from `seed`.
  EvalResult evaluate(const envs::Environment& env, std::size_t n_episodes, std::uint64_t seed) const;

  const LearnerConfig& config() const noexcept { return config_; }
  Networks& online() noexcept { return online_; }
  const Networks& online() const noexcept { return online_; }
  Networks& target() noexcept { return target_; }
  const Networks& target() const noexcept { return target_; }
  diff::Adam& optimizer() noexcept { return *adam_; }
  const diff::Adam& optimizer() const noexcept { return *adam_; }
  const diff::ParamList& parameters() const noexcept { return params_; }
  ReplayBuffer& buffer() noexcept { return buffer_; }
  const ReplayBuffer& buffer() const noexcept { return buffer_; }
  Rng& rng() noexcept { return rng_; }
  const Rng& rng() const noexcept { return rng_; }

  std::size_t env_steps() const noexcept { return env_steps_; }
  std::size_t train_steps() const noexcept { return train_steps_; }
  std::size_t episodes() const noexcept { return episodes_; }
  void set_counters(std::size_t env_steps, std::size_t train_steps, std::size_t episodes) noexcept {
    env_steps_ = env_steps;
    train_steps_ = train_steps;
    episodes_ = episodes;
  }
  double current_epsilon() const { return epsilon_at(config_.epsilon, env_steps_); }

 private:
  struct LossParts;
  LossParts build_loss(Tape& tape, std::span<const EpisodeBatch* const> episodes,
                       const FrozenUnroll* frozen = nullptr) const;

  LearnerConfig config_;
  Networks online_;
  Networks target_;
  diff::ParamList params_;
  std::unique_ptr<diff::Adam> adam_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::size_t env_steps_ = 0;
  std::size_t train_steps_ = 0;
  std::size_t episodes_ = 0;
};

}  // namespace tiger::learner
