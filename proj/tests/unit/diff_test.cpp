#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "../support/gradcheck.hpp"
#include "tiger/diff/nn.hpp"
#include "tiger/diff/ops.hpp"
#include "tiger/diff/optim.hpp"

using namespace tiger;
using namespace tiger::diff;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.flat()) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_CASE("tensor rejects mismatched data") {
  CHECK_THROWS_AS(Tensor2(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor2 t(2, 3, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.shape_string() == "[2x3]");
}

TEST_CASE("linear") {
  Tape tape;
  SUBCASE("identity weight passes input through") {
    Var x = Var::constant(Tensor2::row({3.0, -1.0}));
    Var y = affine(tape, x, Var::constant(Tensor2::identity(2)), Var::constant(Tensor2(1, 2)));
    CHECK(y.value() == Tensor2::row({3.0, -1.0}));
  }
  SUBCASE("zero weight yields bias") {
    Var x = Var::constant(Tensor2::row({7.0, 2.5}));
    Var y = affine(tape, x, Var::constant(Tensor2(2, 2)), Var::constant(Tensor2::row({1.0, 1.0})));
    CHECK(y.value() == Tensor2::row({1.0, 1.0}));
  }
  SUBCASE("shape mismatch names both shapes") {
    Var x = Var::constant(Tensor2(1, 3));
    try {
      (void)affine(tape, x, Var::constant(Tensor2(2, 2)), Var::constant(Tensor2(1, 2)));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[1x3]") != std::string::npos);
      CHECK(msg.find("[2x2]") != std::string::npos);
    }
  }
  SUBCASE("gradient of sum matches finite differences") {
    Rng rng(11);
    Linear lin(4, 3, rng);
    lin.bias.mutable_value() = random_tensor(1, 3, rng);
    Var x = Var::parameter(random_tensor(5, 4, rng));
    ParamList params;
    lin.collect(params, "lin");
    params.push_back({"x", x});
    auto res = testing::gradcheck(params, [&](Tape& t) { return sum(t, lin(t, x)); });
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("gru cell") {
  Rng rng(3);
  SUBCASE("all-zero case stays at zero") {
    GruCell cell(4, 64, rng);
    ParamList params;
    cell.collect(params, "gru");
    for (auto& p : params) p.var.mutable_value().fill(0.0);
    Tape tape;
    Var h = cell(tape, Var::constant(Tensor2(1, 4)), Var::constant(Tensor2(1, 64)));
    CHECK(h.value() == Tensor2(1, 64));
  }
  SUBCASE("gradients match finite differences") {
    GruCell cell(3, 5, rng);
    for (auto* lin : {&cell.input, &cell.hidden}) lin->bias.mutable_value() = random_tensor(1, 15, rng, 0.3);
    Var x = Var::parameter(random_tensor(2, 3, rng));
    Var h = Var::parameter(random_tensor(2, 5, rng, 0.9));
    Var weights = Var::constant(random_tensor(2, 5, rng));
    ParamList params;
    cell.collect(params, "gru");
    params.push_back({"x", x});
    params.push_back({"h", h});
    auto res = testing::gradcheck(params, [&](Tape& t) { return sum(t, mul(t, cell(t, x, h), weights)); });
    CHECK(res.max_rel_error < 1e-4);
  }
  SUBCASE("output stays inside (-1, 1)") {
    GruCell cell(3, 8, rng);
    Tape tape;
    Var h = Var::constant(random_tensor(4, 8, rng, 0.99));
    for (int k = 0; k < 20; ++k) {
      h = cell(tape, Var::constant(random_tensor(4, 3, rng, 5.0)), h);
      for (double v : h.value().flat()) CHECK(std::fabs(v) < 1.0);
    }
  }
  SUBCASE("two-layer stack propagates layer-1 changes") {
    GruCell l1(3, 8, rng), l2(8, 8, rng);
    Tape tape;
    Var h0 = Var::constant(Tensor2(1, 8));
    auto run = [&](double x0) {
      Var x = Var::constant(Tensor2::row({x0, 0.2, -0.4}));
      Var a = l1(tape, x, h0);
      return l2(tape, a, h0).value();
    };
    CHECK_FALSE(run(0.1) == run(0.7));
  }
  SUBCASE("dimension mismatch") {
    GruCell cell(3, 4, rng);
    Tape tape;
    CHECK_THROWS_AS(cell(tape, Var::constant(Tensor2(1, 2)), Var::constant(Tensor2(1, 4))), DimensionError);
  }
}

TEST_CASE("softmax") {
  SUBCASE("symmetric input") {
    for (double v : softmax(std::vector<double>{0, 0, 0})) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("large logits do not overflow") {
    auto s = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::fabs(s[0] - 1.0) < 1e-12);
    CHECK(std::fabs(s[1]) < 1e-12);
  }
  SUBCASE("matches long-double direct evaluation") {
    const long double e1 = std::exp(1.0L), e2 = std::exp(2.0L), e3 = std::exp(3.0L);
    const long double z = e1 + e2 + e3;
    auto s = softmax(std::vector<double>{1, 2, 3});
    CHECK(std::fabs(s[0] - static_cast<double>(e1 / z)) < 1e-15);
    CHECK(std::fabs(s[1] - static_cast<double>(e2 / z)) < 1e-15);
    CHECK(std::fabs(s[2] - static_cast<double>(e3 / z)) < 1e-15);
  }
  SUBCASE("empty input is a domain error") {
    CHECK_THROWS_AS(softmax(std::vector<double>{}), DomainError);
  }
  SUBCASE("random rows are probability vectors") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      auto x = random_tensor(1, 1 + rng.below(9), rng, 50.0);
      auto s = softmax(x.flat());
      double total = 0.0;
      for (double v : s) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::fabs(total - 1.0) < 1e-9);
    }
  }
  SUBCASE("row softmax gradient") {
    Rng rng(9);
    Var x = Var::parameter(random_tensor(3, 4, rng, 2.0));
    Var w = Var::constant(random_tensor(3, 4, rng));
    ParamList params{{"x", x}};
    auto res = testing::gradcheck(params, [&](Tape& t) { return sum(t, mul(t, softmax_rows(t, x), w)); });
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("leaky relu") {
  CHECK(leaky_relu(1.0) == 1.0);
  CHECK(leaky_relu(-1.0, 0.2) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(leaky_relu(0.0) == 0.0);
}

TEST_CASE("elementwise and structural op gradients") {
  Rng rng(21);
  Var a = Var::parameter(random_tensor(3, 4, rng));
  Var b = Var::parameter(random_tensor(3, 4, rng));
  Var s = Var::parameter(random_tensor(3, 1, rng));
  Var row = Var::parameter(random_tensor(1, 4, rng));
  Var w = Var::constant(random_tensor(3, 4, rng));
  ParamList params{{"a", a}, {"b", b}, {"s", s}, {"row", row}};
  const std::vector<std::size_t> gather{2, 0, 2};
  const std::vector<std::size_t> picks{1, 3, 0};
  auto res = testing::gradcheck(params, [&](Tape& t) {
    Var x = add(t, mul(t, tanh(t, a), sigmoid(t, b)), elu(t, sub(t, a, b)));
    x = add_row(t, scale_rows(t, x, s), row);
    x = add(t, x, leaky_relu(t, cos(t, scale(t, b, 1.7))));
    x = add(t, x, abs(t, add_scalar(t, a, 0.05)));
    x = mul(t, x, w);
    const Var parts[] = {x, gather_rows(t, x, gather)};
    Var y = concat_rows(t, parts);
    const Var cols[] = {slice_cols(t, y, 1, 3), relu(t, y)};
    Var z = concat_cols(t, cols);
    Var picked = pick_cols(t, reshape(t, z, 12, 3), std::vector<std::size_t>(12, 1));
    return add(t, sum(t, sum_cols(t, z)), sum(t, mul(t, picked, picked)));
  });
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("batched vector-matrix product") {
  Rng rng(4);
  Var q = Var::parameter(random_tensor(3, 2, rng));
  Var w = Var::parameter(random_tensor(3, 2 * 5, rng));
  Tape tape;
  Var out = batched_vecmat(tape, q, w, 5);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t e = 0; e < 5; ++e) {
      double expected = 0.0;
      for (std::size_t n = 0; n < 2; ++n) expected += q.value()(b, n) * w.value()(b, n * 5 + e);
      CHECK(out.value()(b, e) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
  ParamList params{{"q", q}, {"w", w}};
  Var wt = Var::constant(random_tensor(3, 5, rng));
  auto res = testing::gradcheck(params, [&](Tape& t) { return sum(t, mul(t, batched_vecmat(t, q, w, 5), wt)); });
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Rng rng(1);
    Var p = Var::parameter(random_tensor(2, 3, rng));
    const Tensor2 before = p.value();
    Adam opt({}, {{"p", p}});
    p.grad();  // allocate zero gradient
    for (int i = 0; i < 10; ++i) opt.step();
    CHECK(p.value() == before);
    CHECK(opt.step_count() == 10);
  }
  SUBCASE("single scalar step") {
    Var p = Var::parameter(Tensor2(1, 1, 0.0));
    Adam opt({}, {{"p", p}});
    p.grad()[0] = 1.0;
    opt.step();
    CHECK(std::fabs(p.value()[0] - (-5e-4 / (1.0 + 1e-8))) < 1e-18);
  }
  SUBCASE("constant gradient descends") {
    Var p = Var::parameter(Tensor2(1, 2, 0.0));
    Adam opt({}, {{"p", p}});
    for (int i = 0; i < 100; ++i) {
      p.grad()[0] = 0.3;
      p.grad()[1] = -2.0;
      opt.step();
    }
    CHECK(p.value()[0] < 0.0);
    CHECK(p.value()[1] > 0.0);
  }
  SUBCASE("non-finite gradient names the parameter") {
    Var p = Var::parameter(Tensor2(1, 1, 0.0));
    Adam opt({}, {{"mixer.w", p}});
    p.grad()[0] = std::nan("");
    try {
      opt.step();
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("mixer.w") != std::string::npos);
    }
    CHECK(p.value()[0] == 0.0);
  }
}

TEST_CASE("global norm clipping") {
  Var a = Var::parameter(Tensor2(1, 2));
  Var b = Var::parameter(Tensor2(1, 1));
  ParamList params{{"a", a}, {"b", b}};
  SUBCASE("below the limit is untouched") {
    a.grad()[0] = 3.0;
    a.grad()[1] = 4.0;
    b.grad();
    CHECK(clip_global_norm(params, 10.0) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == 3.0);
    CHECK(a.grad()[1] == 4.0);
  }
  SUBCASE("norm 20 halves every entry") {
    a.grad()[0] = 12.0;
    a.grad()[1] = 0.0;
    b.grad()[0] = 16.0;
    clip_global_norm(params, 10.0);
    CHECK(a.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(b.grad()[0] == doctest::Approx(8.0).epsilon(1e-15));
  }
  SUBCASE("random large gradients end within the limit and never grow") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      for (double& g : a.grad().flat()) g = rng.uniform(-1e3, 1e3);
      for (double& g : b.grad().flat()) g = rng.uniform(-1e3, 1e3);
      const double before = global_norm(params);
      clip_global_norm(params, 10.0);
      const double after = global_norm(params);
      CHECK(after <= 10.0 + 1e-9);
      CHECK(after <= before + 1e-12);
    }
  }
}

TEST_CASE("rng draws are reproducible and serializable") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  const std::string state = a.serialize();
  const double next = a.uniform();
  Rng c(0);
  c.deserialize(state);
  CHECK(c.uniform() == next);
  CHECK_THROWS(a.below(0));
}
