#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tiger/envs/gather.hpp"
#include "tiger/envs/tag.hpp"
#include "tiger/learner/learner.hpp"

namespace tiger::app {

struct EnvSection {
  std::string name = "gather";
  envs::GatherConfig gather;
  envs::TagConfig tag;
  friend bool operator==(const EnvSection&, const EnvSection&) = default;
};

struct GraphSection {
  double k_stat_nbr = 0.5;
  std::size_t k_past_self = 1;
  // "log-rule": ⌈ln(N·T)⌉ for the chosen env; k_past_self is then stored as 0
  bool k_past_self_log_rule = false;
  std::size_t k_past_nbr = 1;
  friend bool operator==(const GraphSection&, const GraphSection&) = default;
};

struct TrainSection {
  std::size_t steps = 50000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double gamma = 0.99;
  double lambda = 0.8;
  double lr = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 5000;
  std::size_t target_sync_interval = 200;
  double grad_clip = 10.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_anneal_steps = 200000;
  friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

struct EvalSection {
  std::size_t interval = 10000;
  std::size_t episodes = 32;
  friend bool operator==(const EvalSection&, const EvalSection&) = default;
};

struct IoSection {
  std::string out_dir = "runs";
  /// Checkpoint every this many evaluation rows; 0 disables checkpoints.
  std::size_t checkpoint_every = 1;
  /// When false the wall_seconds column is written as 0 so reruns match bitwise.
  bool wall_clock = true;
  friend bool operator==(const IoSection&, const IoSection&) = default;
};

struct TrainConfig {
  EnvSection env;
  marl::Algorithm algorithm = marl::Algorithm::tiger_mix;
  learner::ModelDims dims;
  GraphSection graph;
  TrainSection train;
  EvalSection eval;
  IoSection io;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Parses YAML text. `source` names the input in error messages. Unknown
/// keys, wrong types and out-of-range values throw ConfigError with the key
/// path and line.
TrainConfig parse_config(const std::string& text, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);
/// Full YAML rendering; parse_config(to_yaml(c)) == c.
std::string to_yaml(const TrainConfig& config);
/// Reference of every key with its default and meaning.
std::string config_reference();

std::unique_ptr<envs::Environment> make_env(const TrainConfig& config);
/// Graph parameters with the log rule resolved against the configured env.
tgraph::GraphParams resolve_graph(const TrainConfig& config);
learner::LearnerConfig learner_config(const TrainConfig& config);

/// "1,2,3" or "4" into a seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace tiger::app
