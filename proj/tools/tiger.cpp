// tiger: train, evaluate, ablate and inspect temporal-graph MARL runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tiger/app/checkpoint.hpp"
#include "tiger/app/config.hpp"
#include "tiger/app/plot.hpp"
#include "tiger/app/runner.hpp"
#include "tiger/errors.hpp"
#include "tiger/tgraph/stats.hpp"

namespace fs = std::filesystem;
using namespace tiger;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("tiger");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  if (const char* env = std::getenv("TIGER_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept a real match.
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("TIGER_LOG={} is not a log level (trace, debug, info, warn, error, critical, off)", env);
    }
  }
}

/// Shared --config/--seed/--out/--steps handling.
struct Common {
  std::string config_path;
  std::string seeds;
  std::string out;
  std::size_t steps = 0;

  void add_to(CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--config", config_path, "YAML config file (see --help-config)");
    cmd->add_option("--seed", seeds, "seed or comma-separated seed list, overrides train.seeds");
    if (with_out) cmd->add_option("--out", out, "output directory, overrides io.out_dir");
    cmd->add_option("--steps", steps, "environment steps per seed, overrides train.steps");
  }

  app::TrainConfig load() const {
    app::TrainConfig c = config_path.empty() ? app::TrainConfig{} : app::load_config(config_path);
    if (!seeds.empty()) c.train.seeds = app::parse_seed_list(seeds);
    if (!out.empty()) c.io.out_dir = out;
    if (steps > 0) c.train.steps = steps;
    c.validate();
    return c;
  }
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("{}: cannot open for writing", path.string()));
  out << text;
}

std::string metric_name(const app::TrainConfig& c) { return c.env.name == "gather" ? "win rate" : "return"; }

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App cli{"Temporal-graph value decomposition for cooperative multi-agent RL"};
  cli.require_subcommand(0, 1);
  bool help_config = false;
  cli.add_flag("--help-config", help_config, "print every config key with its default and exit");

  Common train_opts;
  bool resume = false;
  auto* train = cli.add_subcommand("train", "train every seed, then write the across-seed aggregate");
  train_opts.add_to(train);
  train->add_flag("--resume", resume, "continue each seed from its checkpoint when present");

  Common eval_opts;
  std::string ckpt_path;
  std::size_t eval_episodes = 0;
  std::uint64_t eval_seed = 0;
  auto* eval = cli.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval->add_option("--config", eval_opts.config_path, "config; defaults to the snapshot inside the checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "episodes, default eval.episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  Common ablate_opts;
  std::string study;
  std::vector<std::string> grid_axes;
  auto* ablate = cli.add_subcommand("ablate", "sweep graph parameters and summarize final metrics");
  ablate_opts.add_to(ablate);
  ablate->add_option("--study", study, "preset grid: study1 | study2 | study3 | study4");
  ablate->add_option("--grid", grid_axes, "custom axis key=v1,v2,... (repeatable)");

  std::size_t st_agents = 5, st_horizon = 8;
  double st_stat = 0.5;
  std::string st_self = "1";
  std::size_t st_nbr = 1;
  auto* stats = cli.add_subcommand("stats", "edge and neighborhood counts of one episode graph");
  stats->add_option("--agents,-n", st_agents, "number of agents N");
  stats->add_option("--horizon,-T", st_horizon, "episode length T");
  stats->add_option("--k-stat-nbr", st_stat, "fraction of pairs kept as static edges");
  stats->add_option("--k-past-self", st_self, "self-history depth or log-rule");
  stats->add_option("--k-past-nbr", st_nbr, "neighbor-history depth");

  std::vector<std::string> plot_inputs;
  std::string plot_out = "curves";
  std::string plot_title = "learning curves";
  std::string plot_ylabel = "evaluation metric";
  auto* plot = cli.add_subcommand("plot", "learning curves with std bands (SVG) plus the plotted data (CSV)");
  plot->add_option("inputs", plot_inputs, "[label=]run-dir | aggregate.csv | metrics.csv")->required();
  plot->add_option("--out", plot_out, "output path prefix; writes PREFIX.svg and PREFIX.csv");
  plot->add_option("--title", plot_title, "chart title");
  plot->add_option("--ylabel", plot_ylabel, "y axis label");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e);
  }

  try {
    if (help_config) {
      std::cout << app::config_reference();
      return 0;
    }
    if (*train) {
      const auto config = train_opts.load();
      const fs::path dir = config.io.out_dir;
      app::RunOptions opts;
      opts.resume = resume;
      const auto results = app::run_train(config, dir, opts);
      int failed = 0;
      for (const auto& r : results) {
        if (!r.ok) {
          ++failed;
          std::cerr << fmt::format("seed {} failed: {}\n", r.seed, r.error);
          continue;
        }
        const auto& last = r.rows.back();
        std::cout << fmt::format("seed {}: final {} {:.3f} ({:.3f}) at {} steps\n", r.seed, metric_name(config),
                                 last.eval_metric, last.eval_std, last.env_steps);
      }
      std::cout << fmt::format("wrote {}\n", (dir / "aggregate.csv").string());
      return failed ? 1 : 0;
    }
    if (*eval) {
      const auto ckpt = app::load_checkpoint(ckpt_path);
      const auto config = eval_opts.config_path.empty() ? app::parse_config(ckpt.config_yaml, ckpt_path)
                                                        : app::load_config(eval_opts.config_path);
      auto env = app::make_env(config);
      learner::Learner l(app::learner_config(config), *env, 0);
      app::restore(ckpt, l);
      const auto r = l.evaluate(*env, eval_episodes ? eval_episodes : config.eval.episodes, eval_seed);
      std::cout << fmt::format("{} over {} episodes at {} env steps: {}\n", metric_name(config), r.per_episode.size(),
                               l.env_steps(), app::mean_std_cell({r.mean, r.std}));
      return 0;
    }
    if (*ablate) {
      const auto config = ablate_opts.load();
      if (study.empty() && grid_axes.empty()) {
        std::cerr << "ablate: empty grid; pass --study NAME or --grid key=v1,v2\n" << ablate->help();
        return 2;
      }
      const auto grid = study.empty() ? app::custom_grid(grid_axes, config.graph) : app::study_grid(study, config.graph);
      const fs::path dir = fs::path(config.io.out_dir) / (study.empty() ? "grid" : study);
      const auto cells = app::run_ablate(config, grid, dir);
      const std::string table = app::format_summary(cells);
      write_file(dir / "summary.txt", table);
      std::cout << table;
      for (const auto& c : cells) {
        if (c.failed_seeds) return 1;
      }
      return 0;
    }
    if (*stats) {
      app::TrainConfig c;
      c.env.gather.n_agents = st_agents;
      c.env.gather.horizon = st_horizon;
      const auto parsed = app::parse_config(
          fmt::format("graph:\n  k_stat_nbr: {}\n  k_past_self: {}\n  k_past_nbr: {}\n", st_stat, st_self, st_nbr),
          "stats options");
      tgraph::GraphParams g;
      g.k_stat_nbr = parsed.graph.k_stat_nbr;
      g.k_past_nbr = parsed.graph.k_past_nbr;
      g.k_past_self = parsed.graph.k_past_self_log_rule ? tgraph::log_self_history_rule(st_agents, st_horizon)
                                                        : parsed.graph.k_past_self;
      tgraph::print_stats(std::cout, tgraph::episode_graph_stats(st_agents, st_horizon, g), g);
      return 0;
    }
    if (*plot) {
      std::vector<app::Series> series;
      for (const auto& in : plot_inputs) series.push_back(app::load_series(in));
      write_file(plot_out + ".svg", app::render_svg(series, plot_title, plot_ylabel));
      write_file(plot_out + ".csv", app::flat_csv(series));
      std::cout << fmt::format("wrote {0}.svg and {0}.csv\n", plot_out);
      return 0;
    }
    std::cout << cli.help();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const app::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
