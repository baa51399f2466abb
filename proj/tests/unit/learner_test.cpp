#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "../support/gradcheck.hpp"
#include "tiger/envs/gather.hpp"
#include "tiger/envs/tag.hpp"
#include "tiger/learner/learner.hpp"

using namespace tiger;
using namespace tiger::learner;

namespace {

LearnerConfig small_config(marl::Algorithm algo) {
  LearnerConfig c;
  c.algorithm = algo;
  c.dims.gru_hidden = 16;
  c.dims.gat_proj = 8;
  c.dims.tgat = {4, 8, 8, 8};
  c.dims.mixer = {8, 8};
  c.batch_size = 4;
  c.buffer_capacity = 50;
  return c;
}

std::vector<const EpisodeBatch*> pointers(const std::vector<EpisodeBatch>& eps) {
  std::vector<const EpisodeBatch*> out;
  for (const auto& e : eps) out.push_back(&e);
  return out;
}

// Random terminated episode of fixed length with the shapes of `env`.
EpisodeBatch synthetic_episode(const envs::Environment& env, std::size_t length, Rng& rng) {
  EpisodeBatch ep;
  for (std::size_t t = 0; t < length; ++t) {
    Tensor2 o(env.n_agents(), env.obs_dim());
    for (double& v : o.flat()) v = rng.uniform(-1, 1);
    ep.observations.push_back(o);
    std::vector<double> s(env.state_dim());
    for (double& v : s) v = rng.uniform(-1, 1);
    ep.states.push_back(s);
    std::vector<int> a(env.n_agents());
    for (int& x : a) x = int(rng.below(env.n_actions()));
    ep.actions.push_back(a);
    ep.rewards.push_back(rng.uniform(-5, 10));
    ep.epsilons.push_back(0.0);
  }
  ep.terminated = true;
  return ep;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  const Schedule s;
  CHECK(epsilon_at(s, 0) == 1.0);
  CHECK(epsilon_at(s, 200000) == 0.05);
  CHECK(epsilon_at(s, 100000) == doctest::Approx(0.525).epsilon(1e-15));
  CHECK(epsilon_at(s, 10000000) == 0.05);
  double prev = 2.0;
  for (std::size_t k = 0; k <= 250000; k += 997) {
    const double e = epsilon_at(s, k);
    CHECK(e <= prev);
    CHECK(e >= 0.05);
    prev = e;
  }
}

TEST_CASE("td lambda targets") {
  const std::vector<double> r{1.0, -2.0, 4.0};
  const std::vector<double> v{0.5, 3.0, 99.0};
  SUBCASE("hand-unrolled three steps") {
    const TdLambdaConfig cfg{0.9, 0.6};
    const double y2 = 4.0;
    const double y1 = -2.0 + 0.9 * (0.4 * 3.0 + 0.6 * y2);
    const double y0 = 1.0 + 0.9 * (0.4 * 0.5 + 0.6 * y1);
    const auto y = td_lambda_targets(r, v, cfg);
    CHECK(y[2] == y2);
    CHECK(y[1] == y1);
    CHECK(y[0] == y0);
  }
  SUBCASE("lambda zero is one-step TD") {
    const auto y = td_lambda_targets(r, v, {0.9, 0.0});
    CHECK(y[0] == 1.0 + 0.9 * 0.5);
    CHECK(y[1] == -2.0 + 0.9 * 3.0);
    CHECK(y[2] == 4.0);
  }
  SUBCASE("lambda one with no discount is the return") {
    const auto y = td_lambda_targets(r, v, {1.0, 1.0});
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 2.0);
    CHECK(y[2] == 4.0);
  }
  CHECK_THROWS_AS(td_lambda_targets(r, std::vector<double>{1.0}, {}), DimensionError);
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(3);
  for (int k = 0; k < 5; ++k) {
    EpisodeBatch e;
    e.rewards = {double(k)};
    buf.add(e);
  }
  CHECK(buf.size() == 3);
  CHECK(buf[0].rewards[0] == 2.0);
  CHECK(buf[2].rewards[0] == 4.0);
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample_indices(4, rng), DomainError);
  ReplayBuffer big(100);
  for (int k = 0; k < 100; ++k) big.add({});
  std::vector<double> hits(100, 0.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto idx = big.sample_indices(32, rng);
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 32);
    for (auto i : idx) hits[i] += 1;
  }
  double chi2 = 0.0;
  const double expect = 2000.0 * 32 / 100;
  for (double h : hits) chi2 += (h - expect) * (h - expect) / expect;
  CHECK(chi2 < 160.0);  // 99.9% quantile of χ² with 99 degrees of freedom is about 149
}

TEST_CASE("episode collection") {
  envs::GatherEnv env({3, 8, 3, 2});
  for (auto algo : {marl::Algorithm::vdn, marl::Algorithm::qmix, marl::Algorithm::tiger_mix}) {
    Learner a(small_config(algo), env, 7);
    Learner b(small_config(algo), env, 7);
    std::size_t counter = 0;
    for (int k = 0; k < 20; ++k) {
      const auto ea = a.collect_episode(env);
      auto env2 = env.clone();
      const auto eb = b.collect_episode(*env2);
      CHECK(ea == eb);
      CHECK(ea.length() <= 8);
      CHECK(ea.terminated);
      for (std::size_t t = 0; t < ea.length(); ++t) CHECK(ea.epsilons[t] == epsilon_at({}, counter + t));
      counter += ea.length();
      CHECK(a.env_steps() == counter);
      CHECK(ea.static_edges.size() == (algo == marl::Algorithm::tiger_mix ? ea.length() : 0));
    }
  }
}

TEST_CASE("training updates") {
  envs::GatherEnv env({3, 8, 3, 2});
  SUBCASE("warming up") {
    Learner l(small_config(marl::Algorithm::qmix), env, 1);
    l.buffer().add(l.collect_episode(env));
    CHECK_FALSE(l.train_step().has_value());
  }
  for (auto algo : {marl::Algorithm::vdn, marl::Algorithm::qmix, marl::Algorithm::tiger_mix}) {
    CAPTURE(marl::algorithm_name(algo));
    auto cfg = small_config(algo);
    Learner l(cfg, env, 3);
    SUBCASE("duplicates give identical per-episode losses") {
      const auto ep = l.collect_episode(env);
      const auto other = l.collect_episode(env);
      const std::vector<EpisodeBatch> eps{ep, other, ep};
      const auto losses = l.per_episode_losses(pointers(eps));
      CHECK(losses[0] == losses[2]);
    }
    SUBCASE("overfitting one episode") {
      Rng rng(11);
      const std::vector<EpisodeBatch> eps{synthetic_episode(env, 6, rng)};
      const auto ptr = pointers(eps);
      double prev = l.loss_on(ptr);
      const double first = prev;
      for (int k = 0; k < 50; ++k) {
        l.train_on(ptr);
        const double now = l.loss_on(ptr);
        CHECK(now < prev);
        prev = now;
      }
      CHECK(prev < 0.8 * first);
    }
    SUBCASE("clipping bound and a shared parameter pool") {
      Rng rng(12);
      std::vector<EpisodeBatch> eps;
      for (int k = 0; k < 4; ++k) {
        auto e = synthetic_episode(env, 5, rng);
        for (double& r : e.rewards) r *= 100.0;
        eps.push_back(e);
      }
      auto cfg_clip = cfg;
      cfg_clip.grad_clip = 10.0;
      Learner lc(cfg_clip, env, 4);
      const auto stats = lc.train_on(pointers(eps));
      CHECK(stats.grad_norm > 10.0);
      CHECK(stats.clipped_norm <= 10.0 + 1e-9);
      const auto& adam_params = lc.optimizer().params();
      REQUIRE(adam_params.size() == lc.parameters().size());
      for (std::size_t k = 0; k < adam_params.size(); ++k) {
        CHECK(adam_params[k].var.node() == lc.parameters()[k].var.node());
      }
    }
  }
}

TEST_CASE("target synchronisation") {
  envs::GatherEnv env({3, 8, 3, 2});
  auto cfg = small_config(marl::Algorithm::tiger_mix);
  cfg.target_sync_interval = 3;
  Learner l(cfg, env, 5);
  Rng rng(2);
  const std::vector<EpisodeBatch> eps{synthetic_episode(env, 4, rng), synthetic_episode(env, 7, rng)};
  const auto ptr = pointers(eps);

  auto values = [&](const Networks& nets) {
    Tape tape;
    auto st = start_unroll(nets, 1);
    Tensor2 o = eps[0].observations[0];
    return forward_step(tape, nets, cfg.graph, st, Var::constant(o), 0).q_values.value();
  };
  diff::ParamList online, target;
  l.online().collect(online);
  l.target().collect(target);
  for (std::size_t k = 0; k < online.size(); ++k) {
    CHECK(online[k].var.value() == target[k].var.value());
    CHECK_FALSE(target[k].var.requires_grad());
  }
  const auto before = values(l.target());
  l.train_on(ptr);
  l.train_on(ptr);
  CHECK(values(l.target()) == before);
  CHECK(values(l.online()) != before);
  l.train_on(ptr);  // third update syncs
  CHECK(values(l.target()) == values(l.online()));
  const auto synced = values(l.target());
  l.train_on(ptr);
  CHECK(values(l.target()) == synced);
  CHECK(l.train_steps() % 3 == 1);
}

TEST_CASE("replayed graphs match the rollout") {
  envs::GatherEnv env({5, 8, 3, 2});
  auto cfg = small_config(marl::Algorithm::tiger_mix);
  Learner l(cfg, env, 9);
  for (int k = 0; k < 5; ++k) {
    const auto ep = l.collect_episode(env);
    auto st = start_unroll(l.online(), 1);
    for (std::size_t t = 0; t < ep.length(); ++t) {
      Tape tape;
      const auto out = forward_step(tape, l.online(), cfg.graph, st, Var::constant(ep.observations[t]), t);
      CHECK(out.graphs.front().static_edges == ep.static_edges[t]);
    }
  }
}

TEST_CASE("evaluation") {
  SUBCASE("untrained gather baseline") {
    envs::GatherEnv env({5, 8, 3, 2});
    Learner l(small_config(marl::Algorithm::qmix), env, 1);
    Rng rng(3);
    double wins = 0.0;
    const int n = 2000;
    for (int k = 0; k < n; ++k) wins += l.rollout(env, 1.0, rng).win;
    CHECK(wins / n < 0.1);
    const auto a = l.evaluate(env, 16, 42);
    const auto b = l.evaluate(env, 16, 42);
    CHECK(a.per_episode == b.per_episode);
    CHECK(a.mean >= 0.0);
    CHECK(a.mean <= 1.0);
  }
  SUBCASE("tag returns are nonnegative") {
    envs::TagConfig tc;
    tc.n_pursuers = 3;
    tc.n_adversaries = 1;
    tc.horizon = 20;
    envs::TagEnv env(tc);
    Learner l(small_config(marl::Algorithm::tiger_mix), env, 1);
    const auto r = l.evaluate(env, 5, 7);
    for (double v : r.per_episode) CHECK(v >= 0.0);
  }
}

TEST_CASE("full chain gradient") {
  envs::GatherEnv env({3, 4, 3, 2});
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto algo : {marl::Algorithm::qmix, marl::Algorithm::tiger_mix}) {
      auto cfg = small_config(algo);
      cfg.dims.gru_hidden = 6;
      cfg.dims.gat_proj = 4;
      cfg.dims.tgat = {3, 4, 4, 4};
      cfg.dims.mixer = {4, 4};
      cfg.graph = {0.67, 1, 1};
      Learner l(cfg, env, seed);
      Rng rng(seed + 100);
      // Perturb the targets away from the online copy so the bootstrap is nontrivial.
      diff::ParamList tp;
      l.target().collect(tp);
      for (auto& p : tp)
        for (double& v : p.var.mutable_value().flat()) v += rng.uniform(-0.1, 0.1);
      // Zero-initialised biases put |x| and ReLU exactly on their corners
      // whenever a small hidden layer is fully inactive; jitter moves them off.
      for (const auto& p : l.parameters())
        for (double& v : p.var.node()->value.flat()) v += rng.uniform(-0.05, 0.05);
      std::vector<EpisodeBatch> eps{synthetic_episode(env, 4, rng), synthetic_episode(env, 3, rng)};
      for (auto& e : eps)
        for (double& r : e.rewards) r *= 0.1;
      const auto ptr = pointers(eps);
      diff::ParamList params;
      for (const auto& p : l.parameters()) {
        if (p.name.rfind("gat.", 0) != 0) params.push_back(p);
      }
      // Earlier base embeddings, kept edges and greedy bootstrap actions enter
      // the update as constants, so the reference loss holds them fixed.
      const auto frozen = l.record_unroll(ptr);
      auto res = testing::gradcheck(params, [&](diff::Tape& t) { return l.td_loss(t, ptr, &frozen); }, 1e-5, true);
      CAPTURE(res.worst_param);
      CAPTURE(marl::algorithm_name(algo));
      CAPTURE(res.worst_analytic);
      CAPTURE(res.worst_numeric);
      CAPTURE(seed);
      CHECK(res.max_rel_error < 1e-4);
      CHECK(res.kinks * 100 <= res.checked);
      ++instances;
    }
  }
  CHECK(instances == 40);
}
