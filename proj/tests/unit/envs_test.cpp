#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <sstream>

#include "tiger/envs/gather.hpp"
#include "tiger/envs/tag.hpp"

using namespace tiger;
using namespace tiger::envs;

TEST_CASE("gather reset") {
  GatherEnv env;
  Rng rng(2024);

  SUBCASE("optimal goal is uniform over three goals") {
    std::array<int, 3> counts{};
    const int trials = 10000;
    for (int k = 0; k < trials; ++k) {
      env.reset(rng);
      ++counts[env.optimal_goal()];
    }
    for (int c : counts) CHECK(std::fabs(c / double(trials) - 1.0 / 3.0) <= 0.02);
  }
  SUBCASE("uninformed agents see an all-zero goal slot") {
    for (int k = 0; k < 50; ++k) {
      auto r = env.reset(rng);
      std::size_t informed = 0;
      for (std::size_t i = 0; i < env.n_agents(); ++i) {
        const auto& o = r.observations[i];
        double slot = o[0] + o[1] + o[2];
        if (env.informed()[i]) {
          ++informed;
          CHECK(slot == 1.0);
          CHECK(o[env.optimal_goal()] == 1.0);
        } else {
          CHECK(slot == 0.0);
        }
      }
      CHECK(informed == 2);
    }
  }
  SUBCASE("observation shapes agree and reset is neutral") {
    auto r = env.reset(rng);
    CHECK(r.observations.size() == 5);
    for (const auto& o : r.observations) CHECK(o.size() == env.obs_dim());
    CHECK(r.global_state.size() == env.state_dim());
    CHECK(r.reward == 0.0);
    CHECK_FALSE(r.terminated);
  }
}

TEST_CASE("gather reward table") {
  GatherEnv env;
  std::vector<bool> informed{true, true, false, false, false};
  SUBCASE("all on the optimal goal wins +10") {
    env.set_episode(1, informed);
    const std::array<int, 5> a{1, 1, 1, 1, 1};
    auto r = env.step(a);
    CHECK(r.reward == 10.0);
    CHECK(r.terminated);
    CHECK(r.info["win"] == 1.0);
  }
  SUBCASE("all on a non-optimal goal pays +5") {
    env.set_episode(1, informed);
    const std::array<int, 5> a{0, 0, 0, 0, 0};
    auto r = env.step(a);
    CHECK(r.reward == 5.0);
    CHECK(r.terminated);
    CHECK(r.info["win"] == 0.0);
  }
  SUBCASE("a partial subset costs -5 and play continues") {
    env.set_episode(1, informed);
    const std::array<int, 5> a{1, 1, 1, 1, 0};
    auto r = env.step(a);
    CHECK(r.reward == -5.0);
    CHECK_FALSE(r.terminated);
    // the previous joint action is visible to everybody on the next step
    for (const auto& o : r.observations) {
      CHECK(o[4 + 4 * 3 + 0] == 1.0);
      CHECK(o[4 + 0 * 3 + 1] == 1.0);
    }
  }
  SUBCASE("horizon forces termination at t = 8") {
    env.set_episode(2, informed);
    const std::array<int, 5> a{0, 1, 2, 0, 1};
    EnvStepResult r;
    for (int t = 0; t < 8; ++t) {
      CHECK_FALSE(r.terminated);
      r = env.step(a);
    }
    CHECK(r.terminated);
    CHECK(env.time() == 8);
    CHECK_THROWS_AS(env.step(a), DomainError);
  }
  SUBCASE("out-of-range action") {
    env.set_episode(0, informed);
    const std::array<int, 5> a{0, 0, 3, 0, 0};
    CHECK_THROWS_AS(env.step(a), DomainError);
    const std::array<int, 5> b{0, 0, -1, 0, 0};
    CHECK_THROWS_AS(env.step(b), DomainError);
  }
}

TEST_CASE("gather episodes from the same seed are identical") {
  auto run = [] {
    GatherEnv env;
    Rng rng(99), act(5);
    std::ostringstream trace;
    auto r = env.reset(rng);
    std::vector<double> rewards;
    while (!r.terminated) {
      std::vector<int> a(5);
      for (int& x : a) x = static_cast<int>(act.below(3));
      r = env.step(a);
      write_trace_line(trace, env.time(), a, r.reward, r.terminated);
    }
    return trace.str();
  };
  CHECK(run() == run());
}

TEST_CASE("tag reset") {
  TagEnv env;
  Rng rng(7);
  SUBCASE("no entities start within the collision radius") {
    for (int k = 0; k < 50; ++k) {
      env.reset(rng);
      std::vector<Vec2> all = env.pursuers();
      all.insert(all.end(), env.adversaries().begin(), env.adversaries().end());
      for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(distance(all[i], all[j]) > 0.1);
        for (const Vec2& o : env.obstacles()) CHECK(distance(all[i], o) > 0.2);
      }
    }
  }
  SUBCASE("global state concatenates positions and velocities") {
    auto r = env.reset(rng);
    CHECK(r.global_state.size() == 4 * 13);
    CHECK(r.observations.size() == 10);
    for (const auto& o : r.observations) CHECK(o.size() == env.obs_dim());
  }
  SUBCASE("same seed, same layout") {
    Rng a(31), b(31);
    TagEnv e1, e2;
    auto r1 = e1.reset(a);
    auto r2 = e2.reset(b);
    CHECK(r1.global_state == r2.global_state);
    CHECK(e1.obstacles() == e2.obstacles());
  }
  SUBCASE("impossible placement is a configuration error") {
    TagConfig crowded;
    crowded.n_pursuers = 400;
    crowded.collision_radius = 0.3;
    crowded.max_placement_tries = 200;
    TagEnv bad(crowded);
    CHECK_THROWS_AS(bad.reset(rng), ConfigError);
  }
  SUBCASE("adversaries must be faster") {
    TagConfig slow;
    slow.adversary_speed = 0.05;
    CHECK_THROWS_AS(TagEnv{slow}, ConfigError);
  }
}

namespace {

// Pursuers 0 and 1 sit just below adversaries trapped in the two top
// corners; everyone else is far away near the bottom edge.
std::vector<Vec2> far_pursuers(std::size_t n) {
  std::vector<Vec2> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({-0.9 + 0.2 * static_cast<double>(i), -0.95});
  return p;
}

}  // namespace

TEST_CASE("tag rewards") {
  TagEnv env;
  const std::vector<Vec2> obstacles{{0.0, 0.0}, {0.0, -0.5}};
  std::vector<int> noop(10, 0);

  SUBCASE("no collisions pays nothing") {
    env.set_layout(far_pursuers(10), {{0.9, 0.9}, {-0.9, 0.9}, {0.5, 0.6}}, obstacles);
    auto r = env.step(noop);
    CHECK(r.reward == 0.0);
  }
  SUBCASE("two simultaneous tags sum to +2") {
    auto p = far_pursuers(10);
    p[0] = {1.0, 0.92};
    p[1] = {-1.0, 0.92};
    env.set_layout(p, {{1.0, 1.0}, {-1.0, 1.0}, {0.5, 0.4}}, obstacles);
    std::vector<int> a = noop;
    a[0] = 3;
    a[1] = 3;
    auto r = env.step(a);
    CHECK(r.reward == 2.0);
    CHECK(r.info["captures"] == 2.0);
  }
  SUBCASE("no-op at rest keeps the position") {
    env.set_layout(far_pursuers(10), {{0.9, 0.9}, {-0.9, 0.9}, {0.5, 0.6}}, obstacles);
    const auto before = env.pursuers();
    env.step(noop);
    CHECK(env.pursuers() == before);
  }
  SUBCASE("walls clamp movement without penalty") {
    auto p = far_pursuers(10);
    p[3] = {1.0, 0.3};
    env.set_layout(p, {{0.9, 0.9}, {-0.9, 0.9}, {0.5, 0.6}}, obstacles);
    std::vector<int> a = noop;
    a[3] = 1;  // +x into the wall
    auto r = env.step(a);
    CHECK(env.pursuers()[3].x == 1.0);
    CHECK(r.reward >= 0.0);
  }
  SUBCASE("obstacles truncate motion at their boundary") {
    env.set_layout(far_pursuers(10), {{0.9, 0.9}, {-0.9, 0.9}, {0.5, 0.6}}, obstacles);
    const Vec2 from{-0.23, 0.0};
    const Vec2 to = env.move(from, 1, 0.05);
    CHECK(to.x == doctest::Approx(-0.2).epsilon(1e-12));
    // moving further in is blocked, moving away is free
    CHECK(env.move(to, 1, 0.05).x == doctest::Approx(to.x));
    CHECK(env.move(to, 2, 0.05).x == doctest::Approx(to.x - 0.05));
  }
  SUBCASE("episode ends at t = 100 with nonnegative integer rewards") {
    Rng rng(3), act(4);
    auto r = env.reset(rng);
    std::size_t steps = 0;
    while (!r.terminated) {
      std::vector<int> a(10);
      for (int& x : a) x = static_cast<int>(act.below(5));
      r = env.step(a);
      ++steps;
      CHECK(r.reward >= 0.0);
      CHECK(r.reward == std::floor(r.reward));
    }
    CHECK(steps == 100);
  }
}
