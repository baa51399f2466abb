#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiger::app {

/// Malformed metrics or aggregate file. The message carries path and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricsRow {
  std::size_t env_steps = 0;
  double train_loss = 0.0;  // mean over updates since the previous row; nan before the first update
  double eval_metric = 0.0;
  double eval_std = 0.0;
  double epsilon = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsHeader = "env_steps,train_loss,eval_metric,eval_std,epsilon,wall_seconds,seed";

std::string format_row(const MetricsRow& row);

/// Append-only CSV writer. Each row goes out in one write and is flushed, so
/// any prefix of the file parses.
class MetricsWriter {
 public:
  /// Creates the file with a header, or appends to an existing one.
  explicit MetricsWriter(const std::filesystem::path& path);
  void append(const MetricsRow& row);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Parses a metrics file. A last line without a newline (interrupted write)
/// is ignored; anything else malformed throws ParseError with its line.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);
/// Rewrites the file keeping the first `keep` rows.
void truncate_metrics(const std::filesystem::path& path, std::size_t keep);

/// Across-seed statistics at one evaluation point.
struct AggregateRow {
  std::size_t env_steps = 0;
  double mean = 0.0;
  double std = 0.0;  // population std over seeds; 0 for one seed
  std::size_t n_seeds = 0;
};

inline constexpr const char* kAggregateHeader = "env_steps,mean,std,n_seeds";

/// Aligns runs row by row (they share the evaluation schedule) and reduces
/// eval_metric. Rows beyond the shortest run are dropped. Episodes end at
/// different times per seed, so the reported step is the rounded mean.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRow>>& runs);
void write_aggregate(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate(const std::filesystem::path& path);

/// Mean and population std of a sample.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace tiger::app
