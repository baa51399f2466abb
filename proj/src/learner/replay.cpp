#include "tiger/learner/replay.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "tiger/errors.hpp"

namespace tiger::learner {

double EpisodeBatch::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(EpisodeBatch episode) {
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (count > episodes_.size()) {
    throw DomainError(fmt::format("cannot sample {} episodes from a buffer of {}", count, episodes_.size()));
  }
  std::vector<std::size_t> idx(episodes_.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < count; ++k) std::swap(idx[k], idx[k + rng.below(idx.size() - k)]);
  idx.resize(count);
  return idx;
}

double epsilon_at(const Schedule& s, std::size_t step) {
  if (s.anneal_steps == 0 || step >= s.anneal_steps) return s.end;
  const double frac = double(step) / double(s.anneal_steps);
  return s.start + frac * (s.end - s.start);
}

std::vector<double> td_lambda_targets(std::span<const double> rewards, std::span<const double> next_values,
                                      const TdLambdaConfig& cfg) {
  const std::size_t n = rewards.size();
  if (next_values.size() != n) {
    throw DimensionError(fmt::format("{} rewards but {} bootstrap values", n, next_values.size()));
  }
  std::vector<double> y(n);
  if (n == 0) return y;
  y[n - 1] = rewards[n - 1];
  for (std::size_t t = n - 1; t-- > 0;) {
    y[t] = rewards[t] + cfg.gamma * ((1.0 - cfg.lambda) * next_values[t] + cfg.lambda * y[t + 1]);
  }
  return y;
}

}  // namespace tiger::learner
