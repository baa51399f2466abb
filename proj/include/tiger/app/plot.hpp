#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tiger/app/metrics.hpp"

namespace tiger::app {

/// One labeled learning curve: mean and std of the evaluation metric per step.
struct Series {
  std::string label;
  std::vector<AggregateRow> rows;
};

/// Reads "[label=]path" where path is a run directory (its aggregate.csv, or
/// else its seed_*/metrics.csv files), an aggregate.csv or a metrics.csv. The
/// label defaults to the directory name of the run.
Series load_series(const std::string& spec);

/// Line chart with one mean curve and a shaded ±std band per series.
std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& y_label);
/// label,env_steps,mean,std rows with full precision.
std::string flat_csv(const std::vector<Series>& series);

}  // namespace tiger::app
