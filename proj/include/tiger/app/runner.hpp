#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tiger/app/config.hpp"
#include "tiger/app/metrics.hpp"

namespace tiger::app {

struct RunOptions {
  /// Continue each seed from its checkpoint when one exists.
  bool resume = false;
  /// Called after every metrics row, in order.
  std::function<void(const MetricsRow&)> on_row;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;  // the complete metrics file after the run
  bool ok = true;
  std::string error;
};

std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::uint64_t seed);

/// One independent run: evaluation at step 0, after the first episode that
/// crosses each multiple of eval.interval, and at the end. Writes
/// metrics.csv and checkpoint.tgrc under seed_dir(run_dir, seed). A
/// non-finite loss stops this seed and is reported in the result.
SeedResult run_seed(const TrainConfig& config, std::uint64_t seed, const std::filesystem::path& run_dir,
                    const RunOptions& options = {});

/// All seeds of the config in turn, then aggregate.csv and config.yaml in
/// run_dir. Returns the per-seed results.
std::vector<SeedResult> run_train(const TrainConfig& config, const std::filesystem::path& run_dir,
                                  const RunOptions& options = {});

/// One ablation cell: a label and the graph section to run with.
struct GridCell {
  std::string label;
  GraphSection graph;
};

/// Preset grids "study1" (k_stat_nbr), "study2" (k_past_self), "study3"
/// (k_past_nbr) and "study4" (k_stat_nbr x k_past_nbr), built on `base`.
std::vector<GridCell> study_grid(const std::string& name, const GraphSection& base);
/// Cartesian product of "key=v1,v2,..." axes over k_stat_nbr, k_past_self and
/// k_past_nbr. Empty axes or unknown keys throw ConfigError.
std::vector<GridCell> custom_grid(const std::vector<std::string>& axes, const GraphSection& base);

struct CellSummary {
  std::string label;
  MeanStd final_metric;  // across seeds, last row of each run
  std::size_t failed_seeds = 0;
};

/// "mean (std)" with three decimals.
std::string mean_std_cell(const MeanStd& m);

/// Runs every cell under run_dir/<label> and returns their summaries.
std::vector<CellSummary> run_ablate(const TrainConfig& config, const std::vector<GridCell>& grid,
                                    const std::filesystem::path& run_dir, const RunOptions& options = {});
/// Fixed-width table of cells plus a line naming the best cell.
std::string format_summary(const std::vector<CellSummary>& cells);

}  // namespace tiger::app
