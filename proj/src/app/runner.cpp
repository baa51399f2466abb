#include "tiger/app/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tiger/app/checkpoint.hpp"
#include "tiger/errors.hpp"

namespace tiger::app {

namespace fs = std::filesystem;

namespace {

/// Config text that ignores the keys a resume may change.
std::string resume_key(TrainConfig c) {
  c.train.steps = 1;
  c.train.seeds = {0};
  c.io = IoSection{};
  return to_yaml(c);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("{}: cannot open for writing", path.string()));
  out << text;
}

}  // namespace

fs::path seed_dir(const fs::path& run_dir, std::uint64_t seed) { return run_dir / fmt::format("seed_{}", seed); }

SeedResult run_seed(const TrainConfig& config, std::uint64_t seed, const fs::path& run_dir, const RunOptions& options) {
  SeedResult result;
  result.seed = seed;
  const fs::path dir = seed_dir(run_dir, seed);
  fs::create_directories(dir);
  const fs::path metrics_path = dir / "metrics.csv";
  const fs::path ckpt_path = dir / "checkpoint.tgrc";

  auto env = make_env(config);
  learner::Learner l(learner_config(config), *env, seed);
  const std::string config_text = to_yaml(config);

  TrainProgress prog;
  prog.seed = seed;
  double resumed_loss_sum = 0.0;
  std::size_t resumed_loss_count = 0;
  if (options.resume && fs::exists(ckpt_path)) {
    const auto ckpt = load_checkpoint(ckpt_path);
    if (resume_key(parse_config(ckpt.config_yaml, ckpt_path.string())) != resume_key(config)) {
      throw ConfigError(fmt::format("{}: checkpoint was written with a different configuration", ckpt_path.string()));
    }
    prog = restore(ckpt, l);
    if (prog.seed != seed) {
      throw ConfigError(fmt::format("{}: checkpoint belongs to seed {}, not {}", ckpt_path.string(), prog.seed, seed));
    }
    // Rows after the checkpoint are replayed; an off-schedule final row is
    // dropped because the continued run evaluates on schedule instead.
    if (prog.last_row_final) {
      --prog.rows_written;
      prog.last_row_final = false;
    }
    resumed_loss_sum = prog.final_loss_sum;
    resumed_loss_count = prog.final_loss_count;
    prog.final_loss_sum = 0.0;
    prog.final_loss_count = 0;
    truncate_metrics(metrics_path, prog.rows_written);
    spdlog::info("seed {}: resuming at {} env steps", seed, l.env_steps());
  } else if (fs::exists(metrics_path)) {
    fs::remove(metrics_path);
  }

  MetricsWriter writer(metrics_path);
  const auto start = std::chrono::steady_clock::now();
  auto wall = [&] {
    if (!config.io.wall_clock) return 0.0;
    return prog.wall_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  double loss_sum = resumed_loss_sum;
  std::size_t loss_count = resumed_loss_count;
  std::optional<std::size_t> last_row_steps;
  if (prog.rows_written > 0) {
    const auto kept = read_metrics(metrics_path);
    if (kept.size() != prog.rows_written) {
      throw ParseError(fmt::format("{}: {} rows but the checkpoint covers {}", metrics_path.string(), kept.size(),
                                   prog.rows_written));
    }
    last_row_steps = kept.back().env_steps;
  }

  auto emit = [&](bool final) {
    const auto eval = l.evaluate(*env, config.eval.episodes, derive_seed(derive_seed(seed, 3), l.env_steps()));
    MetricsRow row;
    row.env_steps = l.env_steps();
    row.train_loss = loss_count ? loss_sum / double(loss_count) : std::nan("");
    row.eval_metric = eval.mean;
    row.eval_std = eval.std;
    row.epsilon = l.current_epsilon();
    row.wall_seconds = wall();
    row.seed = seed;
    writer.append(row);
    prog.final_loss_sum = final ? loss_sum : 0.0;
    prog.final_loss_count = final ? loss_count : 0;
    loss_sum = 0.0;
    loss_count = 0;
    last_row_steps = row.env_steps;
    ++prog.rows_written;
    prog.last_row_final = final;
    spdlog::info("seed {}: step {} eval {:.3f} ({:.3f}) eps {:.3f} loss {:.4g}", seed, row.env_steps, row.eval_metric,
                 row.eval_std, row.epsilon, row.train_loss);
    const std::size_t every = config.io.checkpoint_every;
    if (every > 0 && (final || prog.rows_written % every == 0)) {
      prog.wall_offset = wall();
      save_checkpoint(ckpt_path, capture(config_text, l, prog));
    }
    if (options.on_row) options.on_row(row);
  };

  try {
    if (prog.rows_written == 0) {
      emit(false);
      prog.next_eval = config.eval.interval;
    }
    while (l.env_steps() < config.train.steps) {
      l.buffer().add(l.collect_episode(*env));
      if (const auto stats = l.train_step()) {
        loss_sum += stats->loss;
        ++loss_count;
      }
      if (l.env_steps() >= prog.next_eval) {
        while (prog.next_eval <= l.env_steps()) prog.next_eval += config.eval.interval;
        emit(false);
      }
    }
    if (last_row_steps != l.env_steps()) emit(true);
  } catch (const TrainingError& e) {
    result.ok = false;
    result.error = e.what();
    spdlog::error("seed {}: training aborted at {} env steps: {}", seed, l.env_steps(), e.what());
  }
  result.rows = read_metrics(metrics_path);
  return result;
}

std::vector<SeedResult> run_train(const TrainConfig& config, const fs::path& run_dir, const RunOptions& options) {
  fs::create_directories(run_dir);
  write_text(run_dir / "config.yaml", to_yaml(config));
  std::vector<SeedResult> results;
  std::vector<std::vector<MetricsRow>> runs;
  for (const auto seed : config.train.seeds) {
    results.push_back(run_seed(config, seed, run_dir, options));
    if (results.back().ok) runs.push_back(results.back().rows);
  }
  write_aggregate(run_dir / "aggregate.csv", aggregate(runs));
  return results;
}

std::vector<GridCell> study_grid(const std::string& name, const GraphSection& base) {
  std::vector<GridCell> cells;
  auto stat_cells = [&](std::size_t nbr, bool with_nbr) {
    for (double k : {0.1, 0.5, 0.9}) {
      GraphSection g = base;
      g.k_stat_nbr = k;
      g.k_past_nbr = nbr;
      cells.push_back({with_nbr ? fmt::format("stat{}_nbr{}", k, nbr) : fmt::format("stat{}", k), g});
    }
  };
  if (name == "study1") {
    stat_cells(base.k_past_nbr, false);
  } else if (name == "study2") {
    for (int v : {0, 1, -1}) {
      GraphSection g = base;
      g.k_past_self_log_rule = v < 0;
      g.k_past_self = v < 0 ? 0 : std::size_t(v);
      cells.push_back({v < 0 ? "self_log" : fmt::format("self{}", v), g});
    }
  } else if (name == "study3") {
    for (std::size_t v : {0, 1, 2}) {
      GraphSection g = base;
      g.k_past_nbr = v;
      cells.push_back({fmt::format("nbr{}", v), g});
    }
  } else if (name == "study4") {
    for (std::size_t nbr : {0, 1, 2}) stat_cells(nbr, true);
  } else {
    throw ConfigError(fmt::format("unknown study '{}' (study1 | study2 | study3 | study4)", name));
  }
  return cells;
}

std::vector<GridCell> custom_grid(const std::vector<std::string>& axes, const GraphSection& base) {
  if (axes.empty()) throw ConfigError("empty grid: give a study preset or at least one key=v1,v2 axis");
  std::vector<GridCell> cells{{"", base}};
  for (const auto& axis : axes) {
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("grid axis '{}' is not key=v1,v2,...", axis));
    const std::string key = axis.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(axis.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError(fmt::format("grid axis '{}' has no values", key));
    std::vector<GridCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        // Reuse the config parser so values are validated exactly like file input.
        const TrainConfig parsed = parse_config(fmt::format("graph:\n  {}: {}\n", key, v), "--grid");
        GridCell c = cell;
        if (key == "k_stat_nbr") {
          c.graph.k_stat_nbr = parsed.graph.k_stat_nbr;
        } else if (key == "k_past_self") {
          c.graph.k_past_self = parsed.graph.k_past_self;
          c.graph.k_past_self_log_rule = parsed.graph.k_past_self_log_rule;
        } else if (key == "k_past_nbr") {
          c.graph.k_past_nbr = parsed.graph.k_past_nbr;
        } else {
          throw ConfigError(fmt::format("grid key '{}' is not a graph parameter", key));
        }
        c.label += (c.label.empty() ? "" : "_") + key + "=" + v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

std::string mean_std_cell(const MeanStd& m) { return fmt::format("{:.3f} ({:.3f})", m.mean, m.std); }

std::vector<CellSummary> run_ablate(const TrainConfig& config, const std::vector<GridCell>& grid,
                                    const fs::path& run_dir, const RunOptions& options) {
  if (grid.empty()) throw ConfigError("empty grid");
  std::vector<CellSummary> out;
  for (const auto& cell : grid) {
    TrainConfig c = config;
    c.graph = cell.graph;
    c.validate();
    spdlog::info("ablation cell {}", cell.label);
    const auto results = run_train(c, run_dir / cell.label, options);
    CellSummary s;
    s.label = cell.label;
    std::vector<double> finals;
    for (const auto& r : results) {
      if (!r.ok || r.rows.empty()) {
        ++s.failed_seeds;
        continue;
      }
      finals.push_back(r.rows.back().eval_metric);
    }
    s.final_metric = mean_std(finals);
    out.push_back(s);
  }
  return out;
}

std::string format_summary(const std::vector<CellSummary>& cells) {
  std::size_t width = 4;
  for (const auto& c : cells) width = std::max(width, c.label.size());
  std::string out = fmt::format("{:<{}}  {}\n", "cell", width, "final mean (std)");
  const CellSummary* best = nullptr;
  for (const auto& c : cells) {
    out += fmt::format("{:<{}}  {}", c.label, width, mean_std_cell(c.final_metric));
    if (c.failed_seeds) out += fmt::format("  [{} seed(s) failed]", c.failed_seeds);
    out += "\n";
    if (!best || c.final_metric.mean > best->final_metric.mean) best = &c;
  }
  if (best) out += fmt::format("best: {} {}\n", best->label, mean_std_cell(best->final_metric));
  return out;
}

}  // namespace tiger::app
