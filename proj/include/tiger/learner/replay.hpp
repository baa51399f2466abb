#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "tiger/diff/rng.hpp"
#include "tiger/diff/tensor.hpp"
#include "tiger/tgraph/graph.hpp"

namespace tiger::learner {

using diff::Tensor2;

/// One complete episode as collected by a rollout.
struct EpisodeBatch {
  std::vector<Tensor2> observations;            // per step, N × obs_dim
  std::vector<std::vector<double>> states;      // per step
  std::vector<std::vector<int>> actions;        // per step, one per agent
  std::vector<double> rewards;                  // per step
  std::vector<double> epsilons;                 // ε used at each step
  std::vector<std::vector<tgraph::AgentPair>> static_edges;  // rollout graphs, when built
  bool terminated = false;
  bool win = false;

  std::size_t length() const noexcept { return rewards.size(); }
  double total_reward() const;
  friend bool operator==(const EpisodeBatch&, const EpisodeBatch&) = default;
};

/// FIFO ring of complete episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000);

  void add(EpisodeBatch episode);
  std::size_t size() const noexcept { return episodes_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const EpisodeBatch& operator[](std::size_t i) const { return episodes_[i]; }
  /// `count` distinct indices drawn uniformly; throws DomainError when the
  /// buffer holds fewer than `count` episodes.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  void clear() { episodes_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<EpisodeBatch> episodes_;
};

struct Schedule {
  double start = 1.0;
  double end = 0.05;
  std::size_t anneal_steps = 200000;
};

/// Linear from start to end over anneal_steps, then constant.
double epsilon_at(const Schedule& schedule, std::size_t step);

struct TdLambdaConfig {
  double gamma = 0.99;
  double lambda = 0.8;
};

/// Backward recursion y_{L-1} = r_{L-1},
/// y_t = r_t + γ[(1 − λ) next_values[t] + λ y_{t+1}], where next_values[t] is
/// the bootstrap value of step t + 1. The episode must be terminated, so the
/// value after the last step is zero and next_values[L-1] is ignored.
std::vector<double> td_lambda_targets(std::span<const double> rewards, std::span<const double> next_values,
                                      const TdLambdaConfig& cfg);

}  // namespace tiger::learner
