#include "tiger/app/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "tiger/errors.hpp"
#include "tiger/tgraph/stats.hpp"

namespace tiger::app {

namespace {

std::string where(const std::string& source, const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.line < 0) return source;
  return fmt::format("{}:{}:{}", source, mark.line + 1, mark.column + 1);
}

[[noreturn]] void fail(const std::string& source, const YAML::Node& node, const std::string& key,
                       const std::string& what) {
  throw ConfigError(fmt::format("{}: {}: {}", where(source, node), key, what));
}

std::string scalar(const std::string& source, const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(source, node, key, "expected a scalar value");
  return node.Scalar();
}

std::uint64_t read_uint(const std::string& source, const YAML::Node& node, const std::string& key) {
  const std::string s = scalar(source, node, key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(source, node, key, fmt::format("expected a non-negative integer, got '{}'", s));
  }
  return v;
}

double read_double(const std::string& source, const YAML::Node& node, const std::string& key) {
  const std::string s = scalar(source, node, key);
  double v = 0.0;
  if (!YAML::convert<double>::decode(node, v) || !std::isfinite(v)) {
    fail(source, node, key, fmt::format("expected a finite number, got '{}'", s));
  }
  return v;
}

bool read_bool(const std::string& source, const YAML::Node& node, const std::string& key) {
  bool v = false;
  if (!node.IsScalar() || !YAML::convert<bool>::decode(node, v)) fail(source, node, key, "expected true or false");
  return v;
}

std::string fmt_double(double v) {
  // Shortest text that reads back to the same double, always with a dot or exponent.
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

/// One leaf key of the config file.
struct Field {
  std::string path;  // dotted, e.g. "env.gather.n_agents"
  std::string doc;
  std::function<void(TrainConfig&, const YAML::Node&, const std::string&)> read;
  std::function<std::string(const TrainConfig&)> write;
};

template <typename T>
Field uint_field(std::string path, std::string doc, T TrainConfig::*section, std::size_t T::*member) {
  const std::string key = path;
  return {std::move(path), std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) {
            (c.*section).*member = std::size_t(read_uint(src, n, key));
          },
          [=](const TrainConfig& c) { return fmt::format("{}", (c.*section).*member); }};
}

template <typename T>
Field double_field(std::string path, std::string doc, T TrainConfig::*section, double T::*member) {
  const std::string key = path;
  return {std::move(path), std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) {
            (c.*section).*member = read_double(src, n, key);
          },
          [=](const TrainConfig& c) { return fmt_double((c.*section).*member); }};
}

Field gather_uint(const std::string& name, std::string doc, std::size_t envs::GatherConfig::*member) {
  const std::string key = "env.gather." + name;
  return {key, std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) {
            c.env.gather.*member = std::size_t(read_uint(src, n, key));
          },
          [=](const TrainConfig& c) { return fmt::format("{}", c.env.gather.*member); }};
}

Field tag_uint(const std::string& name, std::string doc, std::size_t envs::TagConfig::*member) {
  const std::string key = "env.tag." + name;
  return {key, std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) {
            c.env.tag.*member = std::size_t(read_uint(src, n, key));
          },
          [=](const TrainConfig& c) { return fmt::format("{}", c.env.tag.*member); }};
}

Field tag_double(const std::string& name, std::string doc, double envs::TagConfig::*member) {
  const std::string key = "env.tag." + name;
  return {key, std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) { c.env.tag.*member = read_double(src, n, key); },
          [=](const TrainConfig& c) { return fmt_double(c.env.tag.*member); }};
}

template <typename Get>
Field dims_field(std::string path, std::string doc, Get get) {
  const std::string key = path;
  return {std::move(path), std::move(doc),
          [=](TrainConfig& c, const YAML::Node& n, const std::string& src) {
            get(c.dims) = std::size_t(read_uint(src, n, key));
          },
          [=](const TrainConfig& c) {
            auto dims = c.dims;
            return fmt::format("{}", get(dims));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"env.name", "task: gather | tag",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   c.env.name = scalar(src, n, "env.name");
                   if (c.env.name != "gather" && c.env.name != "tag") {
                     fail(src, n, "env.name", fmt::format("unknown environment '{}' (gather | tag)", c.env.name));
                   }
                 },
                 [](const TrainConfig& c) { return c.env.name; }});
    f.push_back(gather_uint("n_agents", "number of agents", &envs::GatherConfig::n_agents));
    f.push_back(gather_uint("horizon", "maximum episode length", &envs::GatherConfig::horizon));
    f.push_back(gather_uint("n_goals", "number of goals (= actions)", &envs::GatherConfig::n_goals));
    f.push_back(gather_uint("n_informed", "agents told the optimal goal each episode", &envs::GatherConfig::n_informed));
    f.push_back(tag_uint("n_pursuers", "controlled pursuers", &envs::TagConfig::n_pursuers));
    f.push_back(tag_uint("n_adversaries", "scripted evaders", &envs::TagConfig::n_adversaries));
    f.push_back(tag_uint("horizon", "episode length", &envs::TagConfig::horizon));
    f.push_back(tag_uint("n_obstacles", "circular obstacles", &envs::TagConfig::n_obstacles));
    f.push_back(tag_double("obstacle_radius", "obstacle radius", &envs::TagConfig::obstacle_radius));
    f.push_back(tag_double("arena_half_width", "arena spans [-w, w] on both axes", &envs::TagConfig::arena_half_width));
    f.push_back(tag_double("pursuer_speed", "pursuer displacement per step", &envs::TagConfig::pursuer_speed));
    f.push_back(tag_double("adversary_speed", "evader displacement per step", &envs::TagConfig::adversary_speed));
    f.push_back(tag_double("collision_radius", "tag distance", &envs::TagConfig::collision_radius));
    f.push_back(tag_uint("max_placement_tries", "rejection-sampling budget at reset",
                         &envs::TagConfig::max_placement_tries));

    f.push_back({"algo.name", "vdn | qmix | tiger-mix",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   const auto s = scalar(src, n, "algo.name");
                   try {
                     c.algorithm = marl::parse_algorithm(s);
                   } catch (const ConfigError& e) {
                     fail(src, n, "algo.name", e.what());
                   }
                 },
                 [](const TrainConfig& c) { return std::string(marl::algorithm_name(c.algorithm)); }});
    f.push_back(dims_field("algo.gru_hidden", "width of both GRU layers",
                           [](learner::ModelDims& d) -> std::size_t& { return d.gru_hidden; }));
    f.push_back(dims_field("algo.gat_proj", "edge scorer projection width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.gat_proj; }));
    f.push_back(dims_field("algo.tgat.time", "time encoding width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.tgat.time; }));
    f.push_back(dims_field("algo.tgat.latent", "query/key/value width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.tgat.latent; }));
    f.push_back(dims_field("algo.tgat.fusion_hidden", "fusion layer width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.tgat.fusion_hidden; }));
    f.push_back(dims_field("algo.tgat.embed", "graph embedding width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.tgat.embed; }));
    f.push_back(dims_field("algo.mixer.hyper_hidden", "hypernetwork hidden width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.mixer.hyper_hidden; }));
    f.push_back(dims_field("algo.mixer.embed", "mixing layer width",
                           [](learner::ModelDims& d) -> std::size_t& { return d.mixer.embed; }));

    f.push_back(double_field("graph.k_stat_nbr", "fraction of agent pairs kept as static edges, in [0, 1]",
                             &TrainConfig::graph, &GraphSection::k_stat_nbr));
    f.push_back({"graph.k_past_self", "self-history depth, an integer or log-rule (ceil(ln(N*T)))",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   if (n.IsScalar() && n.Scalar() == "log-rule") {
                     c.graph.k_past_self_log_rule = true;
                     c.graph.k_past_self = 0;
                     return;
                   }
                   c.graph.k_past_self_log_rule = false;
                   c.graph.k_past_self = std::size_t(read_uint(src, n, "graph.k_past_self"));
                 },
                 [](const TrainConfig& c) {
                   return c.graph.k_past_self_log_rule ? std::string("log-rule")
                                                       : fmt::format("{}", c.graph.k_past_self);
                 }});
    f.push_back(uint_field("graph.k_past_nbr", "neighbor-history depth", &TrainConfig::graph,
                           &GraphSection::k_past_nbr));

    f.push_back(uint_field("train.steps", "environment steps per seed", &TrainConfig::train, &TrainSection::steps));
    f.push_back({"train.seeds", "seed list, one independent run each",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   c.train.seeds.clear();
                   if (n.IsScalar()) {
                     c.train.seeds.push_back(read_uint(src, n, "train.seeds"));
                     return;
                   }
                   if (!n.IsSequence()) fail(src, n, "train.seeds", "expected a list of integers");
                   for (const auto& item : n) c.train.seeds.push_back(read_uint(src, item, "train.seeds"));
                 },
                 [](const TrainConfig& c) { return fmt::format("[{}]", fmt::join(c.train.seeds, ", ")); }});
    f.push_back(double_field("train.gamma", "discount", &TrainConfig::train, &TrainSection::gamma));
    f.push_back(double_field("train.lambda", "TD(lambda) trace weight", &TrainConfig::train, &TrainSection::lambda));
    f.push_back(double_field("train.lr", "Adam learning rate", &TrainConfig::train, &TrainSection::lr));
    f.push_back(double_field("train.adam_beta1", "Adam first-moment decay", &TrainConfig::train,
                             &TrainSection::adam_beta1));
    f.push_back(double_field("train.adam_beta2", "Adam second-moment decay", &TrainConfig::train,
                             &TrainSection::adam_beta2));
    f.push_back(double_field("train.adam_eps", "Adam denominator offset", &TrainConfig::train,
                             &TrainSection::adam_eps));
    f.push_back(uint_field("train.batch_size", "episodes per update", &TrainConfig::train, &TrainSection::batch_size));
    f.push_back(uint_field("train.buffer_capacity", "replay capacity in episodes", &TrainConfig::train,
                           &TrainSection::buffer_capacity));
    f.push_back(uint_field("train.target_sync_interval", "updates between target copies", &TrainConfig::train,
                           &TrainSection::target_sync_interval));
    f.push_back(double_field("train.grad_clip", "global gradient norm bound", &TrainConfig::train,
                             &TrainSection::grad_clip));
    f.push_back(double_field("train.epsilon_start", "exploration rate at step 0", &TrainConfig::train,
                             &TrainSection::epsilon_start));
    f.push_back(double_field("train.epsilon_end", "exploration floor", &TrainConfig::train,
                             &TrainSection::epsilon_end));
    f.push_back(uint_field("train.epsilon_anneal_steps", "steps of linear decay", &TrainConfig::train,
                           &TrainSection::epsilon_anneal_steps));

    f.push_back(uint_field("eval.interval", "environment steps between evaluations", &TrainConfig::eval,
                           &EvalSection::interval));
    f.push_back(uint_field("eval.episodes", "greedy episodes per evaluation", &TrainConfig::eval,
                           &EvalSection::episodes));

    f.push_back({"io.out_dir", "output directory",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   c.io.out_dir = scalar(src, n, "io.out_dir");
                 },
                 [](const TrainConfig& c) { return YAML::Dump(YAML::Node(c.io.out_dir)); }});
    f.push_back(uint_field("io.checkpoint_every", "checkpoint after every k-th evaluation row, 0 = never",
                           &TrainConfig::io, &IoSection::checkpoint_every));
    f.push_back({"io.wall_clock", "record elapsed seconds; false writes 0 for bitwise-reproducible metrics",
                 [](TrainConfig& c, const YAML::Node& n, const std::string& src) {
                   c.io.wall_clock = read_bool(src, n, "io.wall_clock");
                 },
                 [](const TrainConfig& c) { return std::string(c.io.wall_clock ? "true" : "false"); }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& path) {
  for (const auto& f : fields()) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

bool is_section(const std::string& path) {
  const std::string prefix = path + ".";
  for (const auto& f : fields()) {
    if (f.path.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

void read_map(TrainConfig& c, const YAML::Node& node, const std::string& prefix, const std::string& source) {
  if (!node.IsMap()) fail(source, node, prefix.empty() ? "<root>" : prefix, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (const Field* f = find_field(path)) {
      f->read(c, kv.second, source);
    } else if (is_section(path)) {
      if (kv.second.IsNull()) continue;
      read_map(c, kv.second, path, source);
    } else {
      fail(source, kv.first, path, "unknown key");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(fmt::format("{}: {}", key, what));
  };
  check(env.name == "gather" || env.name == "tag", "env.name", "must be gather or tag");
  try {
    env.gather.validate();
    env.tag.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("env: {}", e.what()));
  }
  check(graph.k_stat_nbr >= 0.0 && graph.k_stat_nbr <= 1.0, "graph.k_stat_nbr",
        fmt::format("{} is outside [0, 1]", graph.k_stat_nbr));
  check(train.steps > 0, "train.steps", "must be positive");
  check(!train.seeds.empty(), "train.seeds", "needs at least one seed");
  check(train.gamma >= 0.0 && train.gamma < 1.0, "train.gamma", "must lie in [0, 1)");
  check(train.lambda >= 0.0 && train.lambda <= 1.0, "train.lambda", "must lie in [0, 1]");
  check(train.lr > 0.0, "train.lr", "must be positive");
  check(train.adam_beta1 >= 0.0 && train.adam_beta1 < 1.0, "train.adam_beta1", "must lie in [0, 1)");
  check(train.adam_beta2 >= 0.0 && train.adam_beta2 < 1.0, "train.adam_beta2", "must lie in [0, 1)");
  check(train.adam_eps > 0.0, "train.adam_eps", "must be positive");
  check(train.batch_size > 0, "train.batch_size", "must be positive");
  check(train.buffer_capacity >= train.batch_size, "train.buffer_capacity", "must hold at least one batch");
  check(train.target_sync_interval > 0, "train.target_sync_interval", "must be positive");
  check(train.grad_clip > 0.0, "train.grad_clip", "must be positive");
  check(train.epsilon_start >= 0.0 && train.epsilon_start <= 1.0, "train.epsilon_start", "must lie in [0, 1]");
  check(train.epsilon_end >= 0.0 && train.epsilon_end <= train.epsilon_start, "train.epsilon_end",
        "must lie in [0, epsilon_start]");
  check(eval.interval > 0, "eval.interval", "must be positive");
  check(eval.episodes > 0, "eval.episodes", "must be positive");
  check(!io.out_dir.empty(), "io.out_dir", "must not be empty");
  check(dims.gru_hidden > 0 && dims.gat_proj > 0 && dims.tgat.time > 0 && dims.tgat.latent > 0 &&
            dims.tgat.fusion_hidden > 0 && dims.tgat.embed > 0 && dims.mixer.hyper_hidden > 0 && dims.mixer.embed > 0,
        "algo", "layer widths must be positive");
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("{}:{}:{}: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  TrainConfig c;
  if (!root.IsNull()) read_map(c, root, "", source);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

namespace {

/// Emits fields grouped by their dotted prefixes, in table order.
template <typename Leaf>
std::string render(Leaf leaf) {
  std::string out;
  std::vector<std::string> open;
  for (const auto& f : fields()) {
    std::vector<std::string> parts;
    std::stringstream ss(f.path);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    const std::vector<std::string> sections(parts.begin(), parts.end() - 1);
    std::size_t common = 0;
    while (common < open.size() && common < sections.size() && open[common] == sections[common]) ++common;
    open.resize(common);
    for (std::size_t k = common; k < sections.size(); ++k) {
      out += fmt::format("{:{}}{}:\n", "", 2 * k, sections[k]);
      open.push_back(sections[k]);
    }
    std::string line = fmt::format("{:{}}{}: {}", "", 2 * sections.size(), parts.back(), leaf(f));
    // A tab separates an optional trailing comment, aligned in one column.
    if (const auto tab = line.find('\t'); tab != std::string::npos) {
      line = fmt::format("{:<44}# {}", line.substr(0, tab), line.substr(tab + 1));
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string to_yaml(const TrainConfig& config) {
  return render([&](const Field& f) { return f.write(config); });
}

std::string config_reference() {
  const TrainConfig defaults;
  return "# Every key is optional; omitted keys take the value shown.\n" +
         render([&](const Field& f) { return f.write(defaults) + "\t" + f.doc; });
}

std::unique_ptr<envs::Environment> make_env(const TrainConfig& config) {
  if (config.env.name == "gather") return std::make_unique<envs::GatherEnv>(config.env.gather);
  if (config.env.name == "tag") return std::make_unique<envs::TagEnv>(config.env.tag);
  throw ConfigError(fmt::format("env.name: unknown environment '{}'", config.env.name));
}

tgraph::GraphParams resolve_graph(const TrainConfig& config) {
  tgraph::GraphParams g;
  g.k_stat_nbr = config.graph.k_stat_nbr;
  g.k_past_nbr = config.graph.k_past_nbr;
  g.k_past_self = config.graph.k_past_self;
  if (config.graph.k_past_self_log_rule) {
    const auto env = make_env(config);
    g.k_past_self = tgraph::log_self_history_rule(env->n_agents(), env->horizon());
  }
  g.validate();
  return g;
}

learner::LearnerConfig learner_config(const TrainConfig& config) {
  learner::LearnerConfig l;
  l.algorithm = config.algorithm;
  l.graph = resolve_graph(config);
  l.td = {config.train.gamma, config.train.lambda};
  l.epsilon = {config.train.epsilon_start, config.train.epsilon_end, config.train.epsilon_anneal_steps};
  l.adam = {config.train.lr, config.train.adam_beta1, config.train.adam_beta2, config.train.adam_eps};
  l.batch_size = config.train.batch_size;
  l.buffer_capacity = config.train.buffer_capacity;
  l.target_sync_interval = config.train.target_sync_interval;
  l.grad_clip = config.train.grad_clip;
  l.dims = config.dims;
  return l;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError(fmt::format("--seed: '{}' is not a non-negative integer", item));
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seed: empty seed list");
  return seeds;
}

}  // namespace tiger::app
