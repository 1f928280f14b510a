#include <doctest.h>

#include <cmath>

#include "cida/grad_check.hpp"
#include "cida/gradcheck_suite.hpp"
#include "cida/losses.hpp"

using namespace cida;

namespace {
double loss_value(const std::function<Var(Tape&)>& f) {
  Tape tape;
  return f(tape).scalar();
}
}  // namespace

TEST_CASE("prediction loss") {
  CHECK(loss_value([](Tape& t) {
          return losses::prediction_loss(t, t.input(Tensor::from({1, 2}, {0.0, 0.0})), {0});
        }) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  SUBCASE("huge margins stay finite and near zero") {
    double v = loss_value([](Tape& t) {
      return losses::prediction_loss(t, t.input(Tensor::from({1, 2}, {30.0, -30.0})), {0});
    });
    CHECK(v >= 0.0);
    CHECK(v < 1e-12);
  }
  SUBCASE("loss shrinks monotonically as the correct margin grows") {
    double prev = 1e300;
    for (double margin : {1.0, 5.0, 10.0, 20.0}) {
      double v = loss_value([margin](Tape& t) {
        return losses::prediction_loss(
            t, t.input(Tensor::from({2, 2}, {margin, 0.0, margin, 0.0})), {0, 0});
      });
      CHECK(v < prev);
      prev = v;
    }
  }
  SUBCASE("label range and empty batch errors") {
    Tape t;
    CHECK_THROWS_AS(losses::prediction_loss(t, t.input(Tensor::from({1, 2}, {0.0, 0.0})), {2}),
                    DataError);
    CHECK_THROWS_AS(losses::prediction_loss(t, t.input(Tensor(Shape{0, 2})), {}), ShapeError);
  }
}

TEST_CASE("l2 domain loss") {
  CHECK(loss_value([](Tape& t) {
          return losses::l2_domain_loss(t, t.input(Tensor::from({1, 1}, {0.3})),
                                        t.input(Tensor::from({1, 1}, {0.5})));
        }) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(loss_value([](Tape& t) {
          return losses::l2_domain_loss(t, t.input(Tensor::from({1, 2}, {0.0, 0.0})),
                                        t.input(Tensor::from({1, 2}, {3.0, 4.0})));
        }) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(loss_value([](Tape& t) {
          return losses::l2_domain_loss(t, t.input(Tensor::from({2, 1}, {0.7, -0.1})),
                                        t.input(Tensor::from({2, 1}, {0.7, -0.1})));
        }) == 0.0);

  SUBCASE("zero iff equal") {
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
      Tensor a(Shape{3, 2}), b(Shape{3, 2});
      for (auto& v : a.data) v = rng.normal();
      b = a;
      if (i % 2 == 0) b.data[static_cast<std::size_t>(rng.uniform_int(6))] += 1e-5;
      double v = loss_value([&](Tape& t) {
        return losses::l2_domain_loss(t, t.input(a), t.input(b));
      });
      bool equal = a.data == b.data;
      CHECK((v <= 1e-12) == equal);
    }
  }
  SUBCASE("shape mismatch") {
    Tape t;
    CHECK_THROWS_AS(losses::l2_domain_loss(t, t.input(Tensor(Shape{2, 1})),
                                           t.input(Tensor(Shape{2, 2}))),
                    ShapeError);
  }
}

TEST_CASE("gaussian nll loss") {
  auto gauss = [](double mu, double var, double u) {
    return loss_value([=](Tape& t) {
      return losses::gaussian_nll_loss(t, t.input(Tensor::from({1, 1}, {mu})),
                                       t.input(Tensor::from({1, 1}, {var})),
                                       t.input(Tensor::from({1, 1}, {u})));
    });
  };
  CHECK(gauss(0.0, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gauss(0.7, 1.0, 0.7) == 0.0);
  CHECK(gauss(0.7, std::exp(2.0), 0.7) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("bounded below by half log floor") {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      double mu = rng.normal(), u = rng.normal();
      double var = 1e-4 + std::exp(rng.normal());
      CHECK(gauss(mu, var, u) >= 0.5 * std::log(1e-4) - 1e-12);
    }
  }
  SUBCASE("non-positive variance rejected") {
    Tape t;
    CHECK_THROWS_AS(losses::gaussian_nll_loss(t, t.input(Tensor::from({1, 1}, {0.0})),
                                              t.input(Tensor::from({1, 1}, {0.0})),
                                              t.input(Tensor::from({1, 1}, {0.0}))),
                    NumericError);
  }
}

TEST_CASE("gmm nll loss") {
  constexpr double half_log_2pi = 0.91893853320467274;
  auto gmm1 = [](double pi0, double mu, double var, double u, std::int64_t k = 1,
                 double mu2 = 0.0, double var2 = 1.0) {
    return loss_value([=](Tape& t) {
      if (k == 1)
        return losses::gmm_nll_loss(t, t.input(Tensor::from({1, 1}, {pi0})),
                                    t.input(Tensor::from({1, 1, 1}, {mu})),
                                    t.input(Tensor::from({1, 1, 1}, {var})),
                                    t.input(Tensor::from({1, 1}, {u})));
      return losses::gmm_nll_loss(t, t.input(Tensor::from({1, 2}, {pi0, 1.0 - pi0})),
                                  t.input(Tensor::from({1, 2, 1}, {mu, mu2})),
                                  t.input(Tensor::from({1, 2, 1}, {var, var2})),
                                  t.input(Tensor::from({1, 1}, {u})));
    });
  };
  SUBCASE("single standard normal at its mean gives half log 2 pi") {
    CHECK(gmm1(1.0, 0.4, 1.0, 0.4) == doctest::Approx(half_log_2pi).epsilon(1e-12));
  }
  SUBCASE("identical components collapse to the single-component value") {
    double two = gmm1(0.5, 0.4, 1.0, 0.4, 2, 0.4, 1.0);
    double one = gmm1(1.0, 0.4, 1.0, 0.4);
    CHECK(two == doctest::Approx(one).epsilon(1e-12));
  }
  SUBCASE("degenerate weight reduces exactly to the surviving component") {
    double degenerate = gmm1(1.0, -0.2, 0.5, 0.1, 2, 99.0, 1.0);
    double single = gmm1(1.0, -0.2, 0.5, 0.1);
    CHECK(degenerate == doctest::Approx(single).epsilon(1e-12));
  }
  SUBCASE("k=1 differs from the gaussian loss by exactly half log 2 pi") {
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
      double mu = rng.normal(), u = rng.normal(), var = 0.05 + std::exp(rng.normal());
      double g = loss_value([&](Tape& t) {
        return losses::gaussian_nll_loss(t, t.input(Tensor::from({1, 1}, {mu})),
                                         t.input(Tensor::from({1, 1}, {var})),
                                         t.input(Tensor::from({1, 1}, {u})));
      });
      CHECK(gmm1(1.0, mu, var, u) - g == doctest::Approx(half_log_2pi).epsilon(1e-12));
    }
  }
  SUBCASE("unnormalized weights rejected") {
    Tape t;
    CHECK_THROWS_AS(losses::gmm_nll_loss(t, t.input(Tensor::from({1, 2}, {0.7, 0.7})),
                                         t.input(Tensor(Shape{1, 2, 1})),
                                         t.input(Tensor(Shape{1, 2, 1}, 1.0)),
                                         t.input(Tensor(Shape{1, 1}))),
                    NumericError);
  }
}

TEST_CASE("categorical domain loss") {
  Tensor uniform5(Shape{1, 5}, 0.0);
  CHECK(loss_value([&](Tape& t) {
          return losses::categorical_domain_loss(t, t.input(uniform5), {3});
        }) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  double confident = loss_value([](Tape& t) {
    return losses::categorical_domain_loss(t, t.input(Tensor::from({1, 3}, {30.0, 0.0, 0.0})),
                                           {0});
  });
  CHECK(confident < 1e-12);

  CHECK(loss_value([](Tape& t) {
          return losses::categorical_domain_loss(t, t.input(Tensor::from({2, 1}, {7.0, -3.0})),
                                                 {0, 0});
        }) == 0.0);

  Tape t;
  CHECK_THROWS_AS(losses::categorical_domain_loss(t, t.input(uniform5), {5}), DataError);
}

TEST_CASE("value terms") {
  ValueTerms v = value_terms(0.7, 0.2, 2.0);
  CHECK(v.encoder_objective() == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(v.discriminator_objective() == 0.2);

  CHECK(value_terms(0.7, 0.2, 0.0).encoder_objective() == 0.7);

  SUBCASE("larger V_d strictly lowers the encoder objective") {
    CHECK(value_terms(0.7, 0.3, 2.0).encoder_objective() <
          value_terms(0.7, 0.2, 2.0).encoder_objective());
  }
  CHECK_THROWS_AS(value_terms(0.1, 0.1, -0.5), Error);
}

TEST_CASE("all losses pass grad_check at 50 random smooth points") {
  auto rep = gradcheck_losses(777);
  for (const auto& line : rep.lines) {
    INFO(line.name, " worst error ", line.lhs);
    CHECK(line.pass);
  }
}
