#include "tiger/app/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "tiger/app/metrics.hpp"

namespace tiger::app {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'G', 'R', 'C'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string32(std::string& out, const std::string& s) {
  put(out, std::uint32_t(s.size()));
  out += s;
}

void put_string64(std::string& out, const std::string& s) {
  put(out, std::uint64_t(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(fmt::format("checkpoint truncated while reading {} at byte {}", what, pos_));
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string render_state(const std::map<std::string, std::string>& state) {
  YAML::Emitter em;
  em << YAML::BeginMap;
  for (const auto& [k, v] : state) em << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
  em << YAML::EndMap;
  return em.c_str();
}

std::map<std::string, std::string> parse_state(const std::string& text) {
  std::map<std::string, std::string> out;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(fmt::format("checkpoint state: {}", e.what()));
  }
  if (!root.IsMap()) throw ParseError("checkpoint state is not a mapping");
  for (const auto& kv : root) out[kv.first.as<std::string>()] = kv.second.as<std::string>();
  return out;
}

Block block_of(const diff::Tensor2& t) {
  return {t.rows(), t.cols(), std::vector<double>(t.flat().begin(), t.flat().end())};
}

std::string fmt_exact(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::string encode(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put(out, Checkpoint::kVersion);
  put_string64(out, ckpt.config_yaml);
  put_string64(out, render_state(ckpt.state));
  put(out, std::uint32_t(ckpt.blocks.size()));
  for (const auto& [name, b] : ckpt.blocks) {
    if (b.data.size() != b.rows * b.cols) {
      throw ConsistencyError(fmt::format("block {} holds {} values for {}x{}", name, b.data.size(), b.rows, b.cols));
    }
    put_string32(out, name);
    put(out, std::uint64_t(b.rows));
    put(out, std::uint64_t(b.cols));
    for (double v : b.data) put(out, v);
  }
  return out;
}

Checkpoint decode(const std::string& bytes) {
  Reader in(bytes);
  if (in.bytes(4, "magic") != std::string(kMagic, 4)) throw ParseError("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != Checkpoint::kVersion) {
    throw ParseError(fmt::format("checkpoint version {} is not supported (expected {})", version, Checkpoint::kVersion));
  }
  Checkpoint c;
  c.config_yaml = in.bytes(std::size_t(in.get<std::uint64_t>("config length")), "config");
  c.state = parse_state(in.bytes(std::size_t(in.get<std::uint64_t>("state length")), "state"));
  const auto count = in.get<std::uint32_t>("block count");
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = in.bytes(in.get<std::uint32_t>("block name length"), "block name");
    Block b;
    b.rows = std::size_t(in.get<std::uint64_t>("block rows"));
    b.cols = std::size_t(in.get<std::uint64_t>("block cols"));
    if (b.cols != 0 && b.rows > bytes.size() / 8 / b.cols) throw ParseError(fmt::format("block {} is too large", name));
    b.data.resize(b.rows * b.cols);
    for (double& v : b.data) v = in.get<double>("block data");
    c.blocks.emplace_back(std::move(name), std::move(b));
  }
  if (!in.done()) throw ParseError("trailing bytes after the last checkpoint block");
  return c;
}

Checkpoint capture(const std::string& config_yaml, const learner::Learner& l, const TrainProgress& p) {
  Checkpoint c;
  c.config_yaml = config_yaml;
  c.state = {
      {"seed", fmt::format("{}", p.seed)},
      {"next_eval", fmt::format("{}", p.next_eval)},
      {"rows_written", fmt::format("{}", p.rows_written)},
      {"last_row_final", p.last_row_final ? "true" : "false"},
      {"wall_offset", fmt_exact(p.wall_offset)},
      {"final_loss_sum", fmt_exact(p.final_loss_sum)},
      {"final_loss_count", fmt::format("{}", p.final_loss_count)},
      {"env_steps", fmt::format("{}", l.env_steps())},
      {"train_steps", fmt::format("{}", l.train_steps())},
      {"episodes", fmt::format("{}", l.episodes())},
      {"adam_step", fmt::format("{}", l.optimizer().step_count())},
      {"rng", l.rng().serialize()},
  };
  diff::ParamList target;
  l.target().collect(target);
  for (const auto& p : l.parameters()) c.blocks.emplace_back("online." + p.name, block_of(p.var.value()));
  for (const auto& p : target) c.blocks.emplace_back("target." + p.name, block_of(p.var.value()));
  const auto& adam = l.optimizer();
  for (std::size_t k = 0; k < adam.params().size(); ++k) {
    c.blocks.emplace_back("adam.m." + adam.params()[k].name, block_of(adam.first_moments()[k]));
    c.blocks.emplace_back("adam.v." + adam.params()[k].name, block_of(adam.second_moments()[k]));
  }
  const auto& buf = l.buffer();
  for (std::size_t e = 0; e < buf.size(); ++e) {
    const auto& ep = buf[e];
    const std::string pre = fmt::format("buffer.{}.", e);
    const std::size_t len = ep.length();
    const std::size_t n = len ? ep.observations[0].rows() : 0;
    const std::size_t od = len ? ep.observations[0].cols() : 0;
    const std::size_t sd = len ? ep.states[0].size() : 0;
    Block obs{len * n, od, {}}, st{len, sd, {}}, act{len, n, {}}, rew{len, 1, ep.rewards}, eps{len, 1, ep.epsilons};
    for (std::size_t t = 0; t < len; ++t) {
      obs.data.insert(obs.data.end(), ep.observations[t].flat().begin(), ep.observations[t].flat().end());
      st.data.insert(st.data.end(), ep.states[t].begin(), ep.states[t].end());
      for (int a : ep.actions[t]) act.data.push_back(double(a));
    }
    Block edges{0, 3, {}};
    for (std::size_t t = 0; t < ep.static_edges.size(); ++t) {
      for (const auto& [i, j] : ep.static_edges[t]) {
        edges.data.insert(edges.data.end(), {double(t), double(i), double(j)});
        ++edges.rows;
      }
    }
    const Block flags{1, 3, {ep.terminated ? 1.0 : 0.0, ep.win ? 1.0 : 0.0, double(ep.static_edges.size())}};
    c.blocks.emplace_back(pre + "observations", std::move(obs));
    c.blocks.emplace_back(pre + "states", std::move(st));
    c.blocks.emplace_back(pre + "actions", std::move(act));
    c.blocks.emplace_back(pre + "rewards", std::move(rew));
    c.blocks.emplace_back(pre + "epsilons", std::move(eps));
    c.blocks.emplace_back(pre + "edges", std::move(edges));
    c.blocks.emplace_back(pre + "flags", flags);
  }
  return c;
}

namespace {

std::uint64_t state_uint(const Checkpoint& c, const std::string& key) {
  const auto it = c.state.find(key);
  if (it == c.state.end()) throw ParseError(fmt::format("checkpoint state lacks '{}'", key));
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("checkpoint state '{}' = '{}' is not an integer", key, it->second));
  }
}

const std::string& state_str(const Checkpoint& c, const std::string& key) {
  const auto it = c.state.find(key);
  if (it == c.state.end()) throw ParseError(fmt::format("checkpoint state lacks '{}'", key));
  return it->second;
}

double state_double(const Checkpoint& c, const std::string& key) {
  try {
    return std::stod(state_str(c, key));
  } catch (const std::exception&) {
    throw ParseError(fmt::format("checkpoint state '{}' is not a number", key));
  }
}

}  // namespace

TrainProgress restore(const Checkpoint& c, learner::Learner& l) {
  std::map<std::string, const Block*> by_name;
  for (const auto& [name, b] : c.blocks) {
    if (!by_name.emplace(name, &b).second) throw ParseError(fmt::format("duplicate checkpoint block {}", name));
  }
  std::set<std::string> used;
  auto take = [&](const std::string& name) -> const Block& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(fmt::format("checkpoint lacks block {}", name));
    used.insert(name);
    return *it->second;
  };
  auto fill = [&](const std::string& name, diff::Tensor2& t) {
    const Block& b = take(name);
    if (b.rows != t.rows() || b.cols != t.cols()) {
      throw ParseError(fmt::format("block {} is {}x{}, expected {}x{}", name, b.rows, b.cols, t.rows(), t.cols()));
    }
    std::copy(b.data.begin(), b.data.end(), t.flat().begin());
  };

  for (const auto& p : l.parameters()) fill("online." + p.name, p.var.node()->value);
  diff::ParamList target;
  l.target().collect(target);
  for (const auto& p : target) fill("target." + p.name, p.var.node()->value);
  auto& adam = l.optimizer();
  for (std::size_t k = 0; k < adam.params().size(); ++k) {
    fill("adam.m." + adam.params()[k].name, adam.first_moments()[k]);
    fill("adam.v." + adam.params()[k].name, adam.second_moments()[k]);
  }
  adam.set_step_count(state_uint(c, "adam_step"));

  auto& buf = l.buffer();
  buf.clear();
  for (std::size_t e = 0; by_name.count(fmt::format("buffer.{}.flags", e)); ++e) {
    const std::string pre = fmt::format("buffer.{}.", e);
    const Block& flags = take(pre + "flags");
    const Block& obs = take(pre + "observations");
    const Block& st = take(pre + "states");
    const Block& act = take(pre + "actions");
    const Block& rew = take(pre + "rewards");
    const Block& eps = take(pre + "epsilons");
    const Block& edges = take(pre + "edges");
    if (flags.data.size() != 3 || edges.cols != 3) throw ParseError(fmt::format("{}: malformed episode", pre));
    learner::EpisodeBatch ep;
    const std::size_t len = rew.rows;
    const std::size_t n = act.cols;
    if (obs.rows != len * n || st.rows != len || act.rows != len || eps.rows != len) {
      throw ParseError(fmt::format("{}: episode blocks disagree on length", pre));
    }
    ep.rewards = rew.data;
    ep.epsilons = eps.data;
    for (std::size_t t = 0; t < len; ++t) {
      diff::Tensor2 o(n, obs.cols);
      std::copy_n(obs.data.begin() + long(t * n * obs.cols), n * obs.cols, o.flat().begin());
      ep.observations.push_back(std::move(o));
      ep.states.emplace_back(st.data.begin() + long(t * st.cols), st.data.begin() + long((t + 1) * st.cols));
      std::vector<int> a(n);
      for (std::size_t i = 0; i < n; ++i) a[i] = int(act.data[t * n + i]);
      ep.actions.push_back(std::move(a));
    }
    ep.terminated = flags.data[0] != 0.0;
    ep.win = flags.data[1] != 0.0;
    ep.static_edges.resize(std::size_t(flags.data[2]));
    for (std::size_t r = 0; r < edges.rows; ++r) {
      const auto t = std::size_t(edges.data[3 * r]);
      if (t >= ep.static_edges.size()) throw ParseError(fmt::format("{}: edge step {} out of range", pre, t));
      ep.static_edges[t].emplace_back(std::size_t(edges.data[3 * r + 1]), std::size_t(edges.data[3 * r + 2]));
    }
    buf.add(std::move(ep));
  }
  for (const auto& [name, b] : c.blocks) {
    if (!used.count(name)) throw ParseError(fmt::format("unexpected checkpoint block {}", name));
  }

  l.rng().deserialize(state_str(c, "rng"));
  l.set_counters(state_uint(c, "env_steps"), state_uint(c, "train_steps"), state_uint(c, "episodes"));

  TrainProgress p;
  p.seed = state_uint(c, "seed");
  p.next_eval = state_uint(c, "next_eval");
  p.rows_written = state_uint(c, "rows_written");
  p.last_row_final = state_str(c, "last_row_final") == "true";
  p.wall_offset = state_double(c, "wall_offset");
  p.final_loss_sum = state_double(c, "final_loss_sum");
  p.final_loss_count = state_uint(c, "final_loss_count");
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("{}: cannot open for writing", tmp.string()));
    const std::string bytes = encode(ckpt);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error(fmt::format("{}: write failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("{}: cannot open checkpoint", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return decode(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace tiger::app
