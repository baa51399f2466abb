#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tiger/learner/learner.hpp"

namespace tiger::app {

/// Loop bookkeeping that must survive a resume.
struct TrainProgress {
  std::uint64_t seed = 0;
  std::size_t next_eval = 0;     // env-step threshold of the next scheduled evaluation
  std::size_t rows_written = 0;  // metrics rows covered by this checkpoint
  bool last_row_final = false;   // the last covered row was an off-schedule final row
  double wall_offset = 0.0;      // elapsed seconds before this process started
  // Loss accumulated into an off-schedule final row, restored when it is dropped.
  double final_loss_sum = 0.0;
  std::size_t final_loss_count = 0;
  friend bool operator==(const TrainProgress&, const TrainProgress&) = default;
};

/// Named block of 64-bit floats.
struct Block {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  friend bool operator==(const Block&, const Block&) = default;
};

/// Decoded checkpoint file:
///   "TGRC" | u32 version | u64 n + config YAML | u64 n + state YAML |
///   u32 count | count × (u32 n + name | u64 rows | u64 cols | rows·cols f64)
/// All integers and floats little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  std::string config_yaml;
  std::map<std::string, std::string> state;
  std::vector<std::pair<std::string, Block>> blocks;  // in file order
};

std::string encode(const Checkpoint& ckpt);
/// Throws ParseError on bad magic, unknown version or truncation.
Checkpoint decode(const std::string& bytes);

/// Snapshot of online and target parameters, Adam moments and step, RNG,
/// counters and the replay buffer.
Checkpoint capture(const std::string& config_yaml, const learner::Learner& learner, const TrainProgress& progress);
/// Writes everything `capture` stored back into a learner built from the same
/// config. Returns the loop bookkeeping. Throws ParseError on any mismatch.
TrainProgress restore(const Checkpoint& ckpt, learner::Learner& learner);

/// Writes through a temporary file and a rename, so a crash never leaves a
/// half-written checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tiger::app
