#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "tiger/app/checkpoint.hpp"
#include "tiger/app/config.hpp"
#include "tiger/app/metrics.hpp"
#include "tiger/app/plot.hpp"
#include "tiger/app/runner.hpp"
#include "tiger/errors.hpp"

using namespace tiger;
using namespace tiger::app;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory, removed on scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("tiger_app_test_" + std::to_string(::getpid()) + "_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

const char* kTiny = R"(env:
  gather:
    n_agents: 3
algo:
  name: tiger-mix
  gru_hidden: 8
  gat_proj: 4
  tgat: {time: 4, latent: 4, fusion_hidden: 4, embed: 4}
  mixer: {hyper_hidden: 4, embed: 4}
train:
  steps: 120
  seeds: [1, 2]
  batch_size: 4
  buffer_capacity: 20
eval:
  interval: 40
  episodes: 3
io:
  wall_clock: false
)";

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml, "cfg.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  const TrainConfig c = parse_config("");
  CHECK(c == TrainConfig{});
  CHECK(c.train.gamma == 0.99);
  CHECK(c.train.lambda == 0.8);
  CHECK(c.train.lr == 5e-4);
  CHECK(c.train.buffer_capacity == 5000);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.target_sync_interval == 200);
  CHECK(c.train.grad_clip == 10.0);
  CHECK(c.train.epsilon_start == 1.0);
  CHECK(c.train.epsilon_end == 0.05);
  CHECK(c.train.epsilon_anneal_steps == 200000);
}

TEST_CASE("config errors name the key and line") {
  const auto range = error_of("graph:\n  k_stat_nbr: 1.5\n");
  CHECK(range.find("k_stat_nbr") != std::string::npos);

  const auto unknown = error_of("train:\n  lr: 0.001\n  momentum: 0.9\n");
  CHECK(unknown.find("cfg.yaml:3") != std::string::npos);
  CHECK(unknown.find("train.momentum") != std::string::npos);

  CHECK(!error_of("train:\n  steps: many\n").empty());
  CHECK(!error_of("algo:\n  name: dicg\n").empty());
}

TEST_CASE("log rule resolves against the configured env") {
  auto c = parse_config("graph:\n  k_past_self: log-rule\n");
  CHECK(c.graph.k_past_self_log_rule);
  CHECK(resolve_graph(c).k_past_self == 4);
  c.env.name = "tag";
  CHECK(resolve_graph(c).k_past_self == 7);
}

TEST_CASE("yaml rendering round-trips") {
  CHECK(parse_config(to_yaml(TrainConfig{})) == TrainConfig{});
  TrainConfig c = parse_config(kTiny);
  c.train.gamma = 0.1 + 0.2;
  c.train.lr = 1.0 / 3.0;
  c.graph.k_past_self_log_rule = true;
  c.graph.k_past_self = 0;
  c.env.name = "tag";
  c.algorithm = marl::Algorithm::qmix;
  CHECK(parse_config(to_yaml(c)) == c);
  CHECK(parse_config(config_reference()) == TrainConfig{});
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("4") == std::vector<std::uint64_t>{4});
  CHECK(parse_seed_list("1,2,3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK_THROWS_AS(parse_seed_list("1,,2"), ConfigError);
}

TEST_CASE("metrics survive an interrupted write and report bad lines") {
  Scratch s("metrics");
  const auto path = s.dir / "metrics.csv";
  {
    MetricsWriter w(path);
    w.append({0, std::nan(""), 0.25, 0.5, 1.0, 0.0, 7});
    w.append({100, 1.5, 0.1 + 0.2, 0.125, 0.99, 3.25, 7});
  }
  spit(path, slurp(path) + "200,1.2,0.5");  // no trailing newline
  const auto rows = read_metrics(path);
  REQUIRE(rows.size() == 2);
  CHECK(std::isnan(rows[0].train_loss));
  CHECK(rows[1].eval_metric == 0.1 + 0.2);  // exact round trip
  CHECK(rows[1].seed == 7);

  {
    MetricsWriter w(path);  // appends, no second header
    (void)w;
  }
  truncate_metrics(path, 1);
  CHECK(read_metrics(path).size() == 1);

  spit(path, std::string(kMetricsHeader) + "\n0,nan,0,0,1,0,1\nx,1,0,0,1,0,1\n");
  try {
    read_metrics(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  spit(path, std::string(kMetricsHeader) + "\n10,nan,0,0,1,0,1\n5,1,0,0,1,0,1\n");
  CHECK_THROWS_AS(read_metrics(path), ParseError);
}

TEST_CASE("aggregate is the per-row mean and population std") {
  std::vector<std::vector<MetricsRow>> runs(3);
  const double vals[3][2] = {{0.0, 0.2}, {0.5, 0.4}, {1.0, 0.9}};
  for (std::size_t s = 0; s < 3; ++s) {
    runs[s].push_back({0, 0, vals[s][0], 0, 1, 0, s});
    runs[s].push_back({100 + s, 0, vals[s][1], 0, 1, 0, s});
  }
  runs[2].push_back({300, 0, 1.0, 0, 1, 0, 2});  // longer run is cut
  const auto agg = aggregate(runs);
  REQUIRE(agg.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    double m = 0, v = 0;
    for (auto& r : vals) m += r[k] / 3;
    for (auto& r : vals) v += (r[k] - m) * (r[k] - m) / 3;
    CHECK(agg[k].mean == doctest::Approx(m).epsilon(1e-15));
    CHECK(agg[k].std == doctest::Approx(std::sqrt(v)).epsilon(1e-15));
    CHECK(agg[k].n_seeds == 3);
  }
  CHECK(agg[1].env_steps == 101);

  Scratch s("agg");
  write_aggregate(s.dir / "a.csv", agg);
  const auto back = read_aggregate(s.dir / "a.csv");
  REQUIRE(back.size() == agg.size());
  for (std::size_t k = 0; k < agg.size(); ++k) {
    CHECK(back[k].mean == agg[k].mean);
    CHECK(back[k].std == agg[k].std);
  }
}

TEST_CASE("checkpoint encoding is stable and restores the learner") {
  const TrainConfig c = parse_config(kTiny);
  auto env = make_env(c);
  learner::Learner l(learner_config(c), *env, 5);
  for (int e = 0; e < 6; ++e) {
    l.buffer().add(l.collect_episode(*env));
    (void)l.train_step();
  }
  const TrainProgress prog{5, 80, 2, true, 1.5, 0.1 + 0.2, 3};
  const Checkpoint ck = capture(to_yaml(c), l, prog);
  const std::string bytes = encode(ck);
  CHECK(encode(decode(bytes)) == bytes);
  CHECK_THROWS_AS(decode(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(decode(bytes + "x"), ParseError);
  CHECK_THROWS_AS(decode("XXXX" + bytes.substr(4)), ParseError);

  learner::Learner fresh(learner_config(c), *env, 99);
  CHECK(restore(decode(bytes), fresh) == prog);
  CHECK(encode(capture(to_yaml(c), fresh, prog)) == bytes);

  // both continue identically
  for (int e = 0; e < 3; ++e) {
    l.buffer().add(l.collect_episode(*env));
    fresh.buffer().add(fresh.collect_episode(*env));
    const auto a = l.train_step();
    const auto b = fresh.train_step();
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(a->loss == b->loss);
  }
  CHECK(encode(capture("", l, prog)) == encode(capture("", fresh, prog)));

  auto other = c;
  other.dims.gru_hidden = 6;
  learner::Learner wrong(learner_config(other), *env, 1);
  CHECK_THROWS_AS(restore(decode(bytes), wrong), ParseError);
}

TEST_CASE("training is deterministic and resume matches the uninterrupted run") {
  TrainConfig c = parse_config(kTiny);
  Scratch s("runner");
  run_train(c, s.dir / "a");
  run_train(c, s.dir / "b");
  for (auto seed : c.train.seeds) {
    const auto a = slurp(seed_dir(s.dir / "a", seed) / "metrics.csv");
    CHECK(a == slurp(seed_dir(s.dir / "b", seed) / "metrics.csv"));
    CHECK(std::count(a.begin(), a.end(), '\n') >= 4);
  }
  CHECK(slurp(s.dir / "a" / "aggregate.csv") == slurp(s.dir / "b" / "aggregate.csv"));

  TrainConfig shorter = c;
  shorter.train.steps = 50;
  run_train(shorter, s.dir / "c");
  RunOptions opts;
  opts.resume = true;
  run_train(c, s.dir / "c", opts);
  for (auto seed : c.train.seeds) {
    CHECK(slurp(seed_dir(s.dir / "a", seed) / "metrics.csv") == slurp(seed_dir(s.dir / "c", seed) / "metrics.csv"));
  }
  CHECK(slurp(s.dir / "a" / "aggregate.csv") == slurp(s.dir / "c" / "aggregate.csv"));

  // a different model under the same directory is refused
  TrainConfig changed = c;
  changed.train.lr = 1e-3;
  CHECK_THROWS_AS(run_train(changed, s.dir / "c", opts), ConfigError);
}

TEST_CASE("ablation grids") {
  const GraphSection base;
  CHECK(study_grid("study1", base).size() == 3);
  CHECK(study_grid("study2", base).size() == 3);
  CHECK(study_grid("study3", base).size() == 3);
  CHECK(study_grid("study4", base).size() == 9);
  CHECK_THROWS_AS(study_grid("study5", base), ConfigError);
  const auto g = custom_grid({"k_stat_nbr=0.2,0.4", "k_past_nbr=0,1,2"}, base);
  CHECK(g.size() == 6);
  CHECK(g.back().graph.k_stat_nbr == 0.4);
  CHECK(g.back().graph.k_past_nbr == 2);
  CHECK_THROWS_AS(custom_grid({}, base), ConfigError);
  CHECK_THROWS_AS(custom_grid({"k_stat_nbr="}, base), ConfigError);
  CHECK_THROWS_AS(custom_grid({"gamma=0.5"}, base), ConfigError);
  CHECK(mean_std_cell({0.5, 0.25}) == "0.500 (0.250)");
  const auto table = format_summary({{"a", {0.1, 0.0}, 0}, {"b", {0.7, 0.05}, 0}});
  CHECK(table.find("best: b 0.700 (0.050)") != std::string::npos);
}

TEST_CASE("plot data equals the aggregate it was drawn from") {
  TrainConfig c = parse_config(kTiny);
  c.train.seeds = {3};
  Scratch s("plot");
  run_train(c, s.dir / "one");
  const auto series = load_series("solo=" + (s.dir / "one").string());
  CHECK(series.label == "solo");
  const auto agg = read_aggregate(s.dir / "one" / "aggregate.csv");
  REQUIRE(series.rows.size() == agg.size());
  for (const auto& r : series.rows) CHECK(r.std == 0.0);

  const auto from_metrics = load_series((seed_dir(s.dir / "one", 3) / "metrics.csv").string());
  const std::string csv = flat_csv({series, from_metrics});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "label,env_steps,mean,std");
  std::size_t k = 0;
  while (std::getline(in, line) && k < agg.size()) {
    std::stringstream cells(line);
    std::string label, steps, mean, sd;
    std::getline(cells, label, ',');
    std::getline(cells, steps, ',');
    std::getline(cells, mean, ',');
    std::getline(cells, sd, ',');
    CHECK(std::stoull(steps) == agg[k].env_steps);
    CHECK(std::strtod(mean.c_str(), nullptr) == agg[k].mean);
    ++k;
  }
  CHECK(k == agg.size());
  const auto svg = render_svg({series, from_metrics}, "t", "win rate");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
}
