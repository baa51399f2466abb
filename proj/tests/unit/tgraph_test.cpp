#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "../support/gradcheck.hpp"
#include "tiger/diff/ops.hpp"
#include "tiger/tgraph/graph.hpp"
#include "tiger/tgraph/stats.hpp"

using namespace tiger;
using namespace tiger::tgraph;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.flat()) v = rng.uniform(-scale, scale);
  return t;
}

// Direct evaluation of the pairwise attention formula, no tape involved.
Tensor2 attention_oracle(const Tensor2& W, const Tensor2& a, const Tensor2& h) {
  const std::size_t n = h.rows(), d = W.rows(), p = W.cols();
  std::vector<std::vector<double>> wh(n, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < p; ++c)
      for (std::size_t k = 0; k < d; ++k) wh[i][c] += h(i, k) * W(k, c);
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) s += a[c] * wh[i][c] + a[p + c] * wh[j][c];
      s = s >= 0 ? s : 0.2 * s;
      e[j] = std::exp(s);
      total += e[j];
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) = j == i ? 0.0 : e[j] / total;
  }
  return out;
}

std::vector<AgentPair> random_edges(std::size_t n, Rng& rng) {
  std::vector<AgentPair> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.5) e.push_back({i, j});
  return e;
}

}  // namespace

TEST_CASE("score_edges") {
  Rng rng(17);
  SUBCASE("identical features give uniform attention") {
    GatScorer scorer(4, 3, rng);
    Tensor2 feats(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t c = 0; c < 4; ++c) feats(i, c) = 0.1 * double(c) - 0.2;
    auto alpha = score_edges(scorer, feats);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(alpha(i, j) == doctest::Approx(i == j ? 0.0 : 0.25).epsilon(1e-14));
  }
  SUBCASE("rows sum to one") {
    GatScorer scorer(6, 4, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.below(7);
      auto alpha = score_edges(scorer, random_tensor(n, 6, rng, 3.0));
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += alpha(i, j);
        CHECK(std::fabs(s - 1.0) < 1e-9);
        CHECK(alpha(i, i) == 0.0);
      }
    }
  }
  SUBCASE("three agents match the direct formula") {
    GatScorer scorer(4, 3, rng);
    const Tensor2 feats = random_tensor(3, 4, rng, 2.0);
    const auto alpha = score_edges(scorer, feats);
    const auto expected = attention_oracle(scorer.weight.value(), scorer.attention.value(), feats);
    for (std::size_t k = 0; k < 9; ++k) CHECK(std::fabs(alpha[k] - expected[k]) < 1e-14);
  }
  SUBCASE("fewer than two agents is a domain error") {
    GatScorer scorer(4, 3, rng);
    CHECK_THROWS_AS(score_edges(scorer, Tensor2(1, 4)), DomainError);
  }
  SUBCASE("batched scores match per-group scores and differentiate correctly") {
    GatScorer scorer(3, 2, rng);
    Var feats = Var::parameter(random_tensor(8, 3, rng));
    diff::Tape tape;
    Var alpha = scorer(tape, feats, 4);
    for (std::size_t b = 0; b < 2; ++b) {
      Tensor2 group(4, 3);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) group(r, c) = feats.value()(4 * b + r, c);
      const auto single = score_edges(scorer, group);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(alpha.value()(4 * b + r, c) == single(r, c));
    }
    Var weights = Var::constant(random_tensor(8, 4, rng));
    diff::ParamList params;
    scorer.collect(params, "gat");
    params.push_back({"feats", feats});
    auto res = testing::gradcheck(params, [&](diff::Tape& t) {
      return diff::sum(t, diff::mul(t, scorer(t, feats, 4), weights));
    });
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("prune_topk") {
  Rng rng(8);
  GatScorer scorer(4, 4, rng);
  const auto attn = score_edges(scorer, random_tensor(5, 4, rng));
  CHECK(prune_topk(attn, 1.0).size() == 10);
  CHECK(prune_topk(attn, 0.0).empty());
  CHECK(prune_topk(attn, 0.5).size() == 5);
  CHECK(prune_topk(attn, 0.1).size() == 1);
  CHECK(prune_topk(attn, 0.3).size() == 3);

  SUBCASE("keeps the highest symmetric scores") {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.below(7);
      const double k = rng.uniform();
      const auto a = score_edges(scorer, random_tensor(n, 4, rng, 2.0));
      const auto kept = prune_topk(a, k);
      CHECK(kept.size() == static_edge_count(n, k));
      const std::set<AgentPair> kept_set(kept.begin(), kept.end());
      double min_kept = 1e9, max_dropped = -1e9;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          const double s = 0.5 * (a(i, j) + a(j, i));
          if (kept_set.count({i, j})) min_kept = std::min(min_kept, s);
          else max_dropped = std::max(max_dropped, s);
        }
      if (!kept.empty() && kept.size() < pair_count(n)) CHECK(min_kept >= max_dropped);
    }
  }
  SUBCASE("ties resolve lexicographically") {
    Tensor2 flat(4, 4, 1.0 / 3.0);
    for (std::size_t i = 0; i < 4; ++i) flat(i, i) = 0.0;
    const auto kept = prune_topk(flat, 0.5);
    const std::vector<AgentPair> expected{{0, 1}, {0, 2}, {0, 3}};
    CHECK(kept == expected);
  }
}

TEST_CASE("build_temporal_neighborhood") {
  SUBCASE("t = 0 has no history") {
    const std::vector<AgentPair> e{{0, 1}, {1, 2}};
    auto g = build_temporal_neighborhood(e, 3, 0, {0.5, 3, 3});
    CHECK(g.self_history_edges.empty());
    CHECK(g.nbr_history_edges.empty());
    CHECK(g.neighborhood(1).size() == 2);
  }
  SUBCASE("self depth one, neighbor depth zero") {
    const std::vector<AgentPair> e{{0, 1}, {1, 2}};
    auto g = build_temporal_neighborhood(e, 4, 5, {0.5, 1, 0});
    CHECK(g.self_history_edges.size() == 4);
    CHECK(g.nbr_history_edges.empty());
    for (std::size_t i = 0; i < 4; ++i) {
      std::size_t own = 0;
      for (const auto& h : g.self_history_edges) own += h.from.agent == i && h.to == NodeRef{i, 4};
      CHECK(own == 1);
    }
  }
  SUBCASE("matches exhaustive predicate enumeration") {
    Rng rng(123);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng.below(8);
      const std::size_t t = rng.below(10);
      const GraphParams p{rng.uniform(), rng.below(5), rng.below(5)};
      const auto edges = random_edges(n, rng);
      const auto g = build_temporal_neighborhood(edges, n, t, p);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<NodeRef> expected;
        for (std::size_t j = 0; j < n; ++j) {
          const bool linked = std::count(edges.begin(), edges.end(), AgentPair{std::min(i, j), std::max(i, j)}) > 0;
          for (std::size_t tau = 0; tau <= t; ++tau) {
            const std::size_t dt = t - tau;
            const bool stat = linked && dt == 0;
            const bool self = j == i && dt >= 1 && dt <= p.k_past_self;
            const bool nbr = linked && dt >= 1 && dt <= p.k_past_nbr;
            if (stat || self || nbr) expected.push_back({j, tau});
          }
        }
        CHECK(g.neighborhood(i) == expected);
      }
      for (const auto& h : g.nbr_history_edges) {
        const AgentPair pr{std::min(h.from.agent, h.to.agent), std::max(h.from.agent, h.to.agent)};
        CHECK(std::count(g.static_edges.begin(), g.static_edges.end(), pr) == 1);
        CHECK(h.to.time < t);
      }
    }
  }
}

TEST_CASE("static edge gates") {
  Rng rng(2);
  GatScorer scorer(3, 3, rng);
  Var feats = Var::parameter(random_tensor(3, 3, rng));
  diff::Tape tape;
  Var alpha = scorer(tape, feats, 3);
  const std::vector<PairIndex> idx{std::pair<std::size_t, std::size_t>{1, 3}, std::nullopt};
  Var gates = static_edge_gates(tape, alpha, idx);
  CHECK(gates.value() == Tensor2(2, 1, 1.0));
  Var loss = diff::sum(tape, diff::scale(tape, gates, 2.0));
  tape.backward(loss);
  CHECK(alpha.grad()[1] == 1.0);
  CHECK(alpha.grad()[3] == 1.0);
  CHECK(alpha.grad()[0] == 0.0);
}

TEST_CASE("trade-off formula") {
  CHECK(neighborhood_size({0.5, 1, 1}, 5) == 11);
  CHECK(neighborhood_size({0.0, 0, 0}, 5) == 0);
  CHECK(neighborhood_size({0.1, 0, 2}, 5) == 3);
}

TEST_CASE("log rule") {
  CHECK(log_self_history_rule(5, 8) == 4);
  CHECK(log_self_history_rule(10, 100) == 7);
  CHECK(log_self_history_rule(1, 1) == 0);
  CHECK_THROWS_AS(log_self_history_rule(0, 5), DomainError);
}

TEST_CASE("episode graph statistics") {
  SUBCASE("small cooperative task") {
    const auto s = episode_graph_stats(5, 8, {});
    CHECK(s.nodes == 40);
    CHECK(s.static_edges_total == 80);
    CHECK(s.self_history_total == 140);
    CHECK(s.nbr_history_total == 560);
  }
  SUBCASE("pursuit task with adversaries counted") {
    const auto s = episode_graph_stats(13, 100, {});
    CHECK(s.nodes == 1300);
    CHECK(s.static_edges_per_step == 78);
    CHECK(s.self_history_total == 64350);
    CHECK(s.nbr_history_total == 772200);
  }
  SUBCASE("single agent has no pair edges") {
    for (std::size_t T : {1u, 5u, 100u}) {
      const auto s = episode_graph_stats(1, T, {1.0, 3, 3});
      CHECK(s.static_edges_total == 0);
      CHECK(s.nbr_history_total == 0);
      CHECK(s.bounded_nbr_history_total == 0);
    }
  }
  SUBCASE("bounded counts agree with constructed graphs") {
    const GraphParams p{0.5, 2, 1};
    const std::size_t N = 5, T = 8;
    std::size_t self = 0, nbr = 0, stat = 0;
    std::vector<AgentPair> e{{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 4}};
    for (std::size_t t = 0; t < T; ++t) {
      auto g = build_temporal_neighborhood(e, N, t, p);
      self += g.self_history_edges.size();
      nbr += g.nbr_history_edges.size();
      stat += g.static_edges.size();
    }
    const auto s = episode_graph_stats(N, T, p);
    CHECK(s.bounded_self_history_total == self);
    CHECK(s.bounded_nbr_history_total == nbr);
    CHECK(s.pruned_static_total == stat);
  }
  SUBCASE("unbounded neighbor history grows quadratically") {
    for (std::size_t N : {3u, 6u, 12u}) {
      for (std::size_t T : {10u, 40u}) {
        const double base = double(episode_graph_stats(N, T, {}).nbr_history_total);
        const double twice_t = double(episode_graph_stats(N, 2 * T, {}).nbr_history_total);
        const double twice_n = double(episode_graph_stats(2 * N, T, {}).nbr_history_total);
        CHECK(twice_t / base == doctest::Approx(4.0).epsilon(0.06));
        CHECK(twice_n / base == doctest::Approx(4.0).epsilon(0.25));
      }
    }
  }
  SUBCASE("printed table") {
    std::ostringstream os;
    print_stats(os, episode_graph_stats(5, 8, {}), {});
    const auto text = os.str();
    CHECK(text.find("nodes: 40\n") != std::string::npos);
    CHECK(text.find("neighborhood_size_tradeoff: 11\n") != std::string::npos);
    CHECK(text.find("neighborhood_size_compact_claim: 6\n") != std::string::npos);
    CHECK(text.find("log_rule_k_past_self: 4\n") != std::string::npos);
  }
}

TEST_CASE("graph params validation") {
  CHECK_THROWS_AS(GraphParams({1.5, 1, 1}).validate(), ConfigError);
  CHECK_THROWS_AS(GraphParams({-0.1, 1, 1}).validate(), ConfigError);
  CHECK_NOTHROW(GraphParams({1.0, 0, 0}).validate());
}
