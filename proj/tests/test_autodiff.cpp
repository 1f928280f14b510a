#include <doctest.h>

#include <cmath>

#include "cida/adam.hpp"
#include "cida/grad_check.hpp"
#include "cida/gradcheck_suite.hpp"
#include "cida/ops.hpp"

using namespace cida;

TEST_CASE("primitive forward values") {
  Tape tape;
  Var r = ops::relu(tape.input(Tensor::row({-1.0, 0.0, 2.0})));
  CHECK(r.val().at(0) == 0.0);
  CHECK(r.val().at(1) == 0.0);
  CHECK(r.val().at(2) == 2.0);

  Var m = ops::matmul(tape.input(Tensor(Shape{2, 3}, 1.0)), tape.input(Tensor(Shape{3, 1}, 1.0)));
  CHECK(m.shape() == Shape{2, 1});
  CHECK(m.val().at(0) == 3.0);
  CHECK(m.val().at(1) == 3.0);

  Var sp = ops::softplus(tape.input(Tensor::scalar(0.0)));
  CHECK(sp.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("op name dispatch covers the required primitive set") {
  Tape tape;
  Var a = tape.input(Tensor::row({1.0, 2.0}));
  Var b = tape.input(Tensor::row({3.0, 4.0}));
  CHECK(ops::forward(tape, "add", {a, b}).val().at(1) == 6.0);
  CHECK(ops::forward(tape, "multiply", {a, b}).val().at(0) == 3.0);
  CHECK(ops::forward(tape, "negate", {a}).val().at(0) == -1.0);
  CHECK(ops::forward(tape, "square", {a}).val().at(1) == 4.0);
  CHECK(ops::forward(tape, "sum", {a}).scalar() == 3.0);
  CHECK(ops::forward(tape, "mean", {a}).scalar() == 1.5);
  CHECK(ops::forward(tape, "concat-last-axis", {a, b}).shape() == Shape{1, 4});
  Var idx = tape.input(Tensor::from({2}, {1.0, 0.0}));
  Var sel = ops::forward(tape, "select-rows",
                         {tape.input(Tensor::from({2, 1}, {5.0, 7.0})), idx});
  CHECK(sel.val().at(0) == 7.0);
  CHECK(sel.val().at(1) == 5.0);
  Var ls = ops::forward(tape, "softmax-logsumexp", {tape.input(Tensor::row({0.0, 0.0}))});
  CHECK(ls.val().at(0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(ops::forward(tape, "no-such-op", {a}), Error);
}

TEST_CASE("backward basics") {
  SUBCASE("square at 3 gives gradient 6") {
    Tensor x = Tensor::scalar(3.0);
    x.set_requires_grad(true);
    Tape tape;
    Var y = ops::square(tape.leaf(x));
    tape.backward(y);
    CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("fan-out accumulates: d(x+x)/dx = 2") {
    Tensor x = Tensor::scalar(1.0);
    x.set_requires_grad(true);
    Tape tape;
    Var v = tape.leaf(x);
    tape.backward(ops::add(v, v));
    CHECK(x.grad[0] == 2.0);
  }
  SUBCASE("mean((w-t)^2) at w=t has zero gradient") {
    Tensor w = Tensor::row({0.3, -1.2, 4.0});
    w.set_requires_grad(true);
    Tape tape;
    Var diff = ops::sub(tape.leaf(w), tape.input(Tensor::row({0.3, -1.2, 4.0})));
    tape.backward(ops::mean(ops::square(diff)));
    for (double g : w.grad) CHECK(g == 0.0);
  }
  SUBCASE("no grad-requiring leaves is a no-op") {
    Tape tape;
    Var y = ops::sum(ops::square(tape.input(Tensor::row({1.0, 2.0}))));
    CHECK_NOTHROW(tape.backward(y));
  }
  SUBCASE("non-scalar output rejected") {
    Tensor x = Tensor::row({1.0, 2.0});
    x.set_requires_grad(true);
    Tape tape;
    Var y = ops::square(tape.leaf(x));
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }
  SUBCASE("detached output rejected") {
    Tape tape;
    Var from_elsewhere{&tape, 5};
    CHECK_THROWS_AS(tape.backward(from_elsewhere), Error);
  }
}

TEST_CASE("non-finite values are caught at op boundaries with the op name") {
  Tape tape;
  CHECK_THROWS_WITH_AS(ops::log(tape.input(Tensor::row({1.0, -2.0}))),
                       "log: non-positive operand", NumericError);
  CHECK_THROWS_AS(ops::divide(tape.input(Tensor::row({1.0})),
                              tape.input(Tensor::row({0.0}))),
                  NumericError);
  // exp overflow surfaces as a non-finite result tagged with the op
  CHECK_THROWS_WITH_AS(ops::exp(tape.input(Tensor::row({1000.0}))),
                       "non-finite value in exp", NumericError);
}

TEST_CASE("grad_check harness") {
  SUBCASE("cubic at x=2 with h=1e-5 is accurate to 1e-8") {
    double err = grad_check(
        [](Tape& t, Var x) {
          (void)t;
          return ops::sum(ops::multiply(ops::square(x), x));
        },
        Tensor::scalar(2.0), 1e-5);
    CHECK(err <= 1e-8);
  }
  SUBCASE("relu at a kink is flagged by an O(1) error") {
    double err = grad_check([](Tape&, Var x) { return ops::sum(ops::relu(x)); },
                            Tensor::scalar(0.0), 1e-5);
    CHECK(err == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("non-finite probe value is an error") {
    CHECK_THROWS_AS(grad_check([](Tape&, Var x) { return ops::sum(ops::log(x)); },
                               Tensor::scalar(1e-6), 1e-5),
                    NumericError);
  }
}

TEST_CASE("every primitive op passes grad_check at 50 random smooth points") {
  auto rep = gradcheck_primitives(12345);
  for (const auto& line : rep.lines) {
    INFO(line.name, " worst error ", line.lhs);
    CHECK(line.pass);
  }
}

TEST_CASE("adam") {
  SUBCASE("first-step displacement magnitude equals lr") {
    Tensor w = Tensor::scalar(1.0);
    w.set_requires_grad(true);
    w.grad[0] = 2.0;
    AdamState adam({&w}, AdamHyper{0.1});
    adam.step();
    CHECK(adam.steps() == 1);
    CHECK(w.data[0] == doctest::Approx(0.9).epsilon(1e-7));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor w = Tensor::row({1.0, -2.0, 0.5});
    w.set_requires_grad(true);
    AdamState adam({&w}, AdamHyper{0.1});
    for (int i = 0; i < 3; ++i) adam.step();
    CHECK(w.data == std::vector<double>{1.0, -2.0, 0.5});
  }
  SUBCASE("lr=0 is bit-identical") {
    Tensor w = Tensor::row({0.1234567891234, -9.87654321});
    w.set_requires_grad(true);
    auto before = w.data;
    w.grad = {1.5, -2.5};
    AdamState adam({&w}, AdamHyper{0.0});
    adam.step();
    CHECK(w.data == before);
  }
  SUBCASE("two steps on f(w)=w^2 from w=1 monotonically decrease f") {
    Tensor w = Tensor::scalar(1.0);
    w.set_requires_grad(true);
    AdamState adam({&w}, AdamHyper{0.05});
    double prev = 1.0;
    for (int i = 0; i < 2; ++i) {
      w.zero_grad();
      Tape tape;
      Var f = ops::square(tape.leaf(w));
      tape.backward(f);
      adam.step();
      double now = w.data[0] * w.data[0];
      CHECK(now < prev);
      prev = now;
    }
  }
  SUBCASE("non-finite gradient rejected") {
    Tensor w = Tensor::scalar(1.0);
    w.set_requires_grad(true);
    w.grad[0] = std::numeric_limits<double>::quiet_NaN();
    AdamState adam({&w}, AdamHyper{0.1});
    CHECK_THROWS_AS(adam.step(), NumericError);
  }
}

TEST_CASE("gradient reversal") {
  Tensor up = Tensor::scalar(0.5);
  CHECK(ops::grl_backward_scale(up, 2.0).at(0) == -1.0);

  Tensor both = Tensor::row({1.0, -1.0});
  Tensor flipped = ops::grl_backward_scale(both, 1.0);
  CHECK(flipped.at(0) == -1.0);
  CHECK(flipped.at(1) == 1.0);

  SUBCASE("on tape: forward identity, backward scaled by -lambda") {
    Tensor x = Tensor::row({2.0, -3.0});
    x.set_requires_grad(true);
    Tape tape;
    Var y = ops::grl(tape.leaf(x), 2.0);
    CHECK(y.val().data == x.data);
    tape.backward(ops::sum(y));
    CHECK(x.grad[0] == -2.0);
    CHECK(x.grad[1] == -2.0);
  }
  SUBCASE("lambda=0 decouples: zero gradient") {
    Tensor x = Tensor::scalar(4.0);
    x.set_requires_grad(true);
    Tape tape;
    tape.backward(ops::sum(ops::grl(tape.leaf(x), 0.0)));
    CHECK(x.grad[0] == 0.0);
  }
  CHECK_THROWS_AS(ops::grl_backward_scale(up, -1.0), Error);
}

TEST_CASE("tape evaluation is deterministic within a build") {
  auto run = [] {
    Rng rng(99);
    Tensor a(Shape{4, 4});
    for (auto& v : a.data) v = rng.normal();
    Tape tape;
    Var x = tape.input(a);
    return ops::sum(ops::tanh(ops::matmul(x, x))).scalar();
  };
  CHECK(run() == run());
}
