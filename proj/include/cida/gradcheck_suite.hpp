#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cida/grad_check.hpp"
#include "cida/losses.hpp"
#include "cida/models.hpp"
#include "cida/oracle.hpp"

// Finite-difference validation of every differentiable primitive and every
// training loss, at random smooth points. Backs the `gradcheck` CLI command.

namespace cida {

namespace gradcheck_detail {

inline Tensor randn(Rng& rng, Shape shape, double sd = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

inline Tensor randn_away_from(Rng& rng, Shape shape, double margin) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) {
    do {
      v = rng.normal();
    } while (std::abs(v) < margin);
  }
  return t;
}

inline Tensor rand_positive(Rng& rng, Shape shape, double lo = 0.05) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = lo + std::exp(rng.normal(0.0, 0.5));
  return t;
}

// Scalarize a tensor-valued op with a random but fixed weighting so every
// output coordinate contributes to the checked gradient. The weights are a
// pure function of wseed: repeated probe evaluations see the same function.
inline Var weighted_sum(Tape& tape, Var v, std::uint64_t wseed) {
  Rng wr(wseed);
  Tensor w(v.shape());
  for (auto& e : w.data) e = wr.normal();
  return ops::sum(ops::multiply(v, tape.input(std::move(w))));
}

using PointFn = std::function<double(Rng&)>;  // one grad_check trial -> max rel error

inline void run_check(oracle::OracleReport& rep, const std::string& name, Rng& rng,
                      int trials, const PointFn& one, double tol = 1e-5) {
  double worst = 0.0;
  try {
    for (int i = 0; i < trials; ++i) worst = std::max(worst, one(rng));
    rep.check_close(name, worst, 0.0, tol);
  } catch (const Error& e) {
    rep.fail(name, e.what());
  }
}

}  // namespace gradcheck_detail

// Every primitive op, checked with h = 1e-6 at random smooth points.
inline oracle::OracleReport gradcheck_primitives(std::uint64_t seed, int trials = 50) {
  namespace d = gradcheck_detail;
  oracle::OracleReport rep;
  Rng rng(mix_seed(seed, 7));
  const double h = 1e-6;

  auto unary = [&](const char* name, auto op, auto make_input) {
    d::run_check(rep, std::string("op-") + name, rng, trials, [&, name](Rng& r) {
      Tensor x = make_input(r);
      const std::uint64_t ws = r.next_u64();
      return grad_check(
          [&op, ws](Tape& t, Var v) { return d::weighted_sum(t, op(v), ws); }, x, h);
    });
  };

  unary("negate", [](Var v) { return ops::negate(v); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("exp", [](Var v) { return ops::exp(v); }, [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("log", [](Var v) { return ops::log(v); },
        [&](Rng& r) { return d::rand_positive(r, {3, 4}); });
  unary("tanh", [](Var v) { return ops::tanh(v); }, [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("relu", [](Var v) { return ops::relu(v); },
        [&](Rng& r) { return d::randn_away_from(r, {3, 4}, 1e-3); });
  unary("softplus", [](Var v) { return ops::softplus(v); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("square", [](Var v) { return ops::square(v); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("sum", [](Var v) { return ops::sum(v); }, [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("mean", [](Var v) { return ops::mean(v); }, [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("softmax-logsumexp", [](Var v) { return ops::log_softmax(v); },
        [&](Rng& r) { return d::randn(r, {4, 5}, 2.0); });
  unary("softmax", [](Var v) { return ops::softmax(v); },
        [&](Rng& r) { return d::randn(r, {4, 5}, 2.0); });
  unary("logsumexp", [](Var v) { return ops::logsumexp(v); },
        [&](Rng& r) { return d::randn(r, {4, 5}, 2.0); });
  unary("slice-cols", [](Var v) { return ops::slice_cols(v, 1, 2); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("reshape", [](Var v) { return ops::reshape(v, {4, 3}); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("tile-mid", [](Var v) { return ops::tile_mid(v, 3); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("sum-last", [](Var v) { return ops::sum_last(v); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });
  unary("select-rows", [](Var v) { return ops::select_rows(v, {2, 0, 2}); },
        [&](Rng& r) { return d::randn(r, {3, 4}); });

  auto binary = [&](const char* name, auto op, Shape sa, Shape sb, bool b_positive = false) {
    d::run_check(rep, std::string("op-") + name, rng, trials, [&, sa, sb](Rng& r) {
      Tensor a = d::randn(r, sa);
      Tensor b = b_positive ? d::randn_away_from(r, sb, 0.2) : d::randn(r, sb);
      const std::uint64_t ws = r.next_u64();
      return grad_check_multi(
          [&op, ws](Tape& t, std::vector<Var>& v) {
            return d::weighted_sum(t, op(v[0], v[1]), ws);
          },
          {a, b}, h);
    });
  };

  binary("matmul", [](Var a, Var b) { return ops::matmul(a, b); }, {3, 4}, {4, 2});
  binary("add", [](Var a, Var b) { return ops::add(a, b); }, {3, 4}, {3, 4});
  binary("add-row-broadcast", [](Var a, Var b) { return ops::add(a, b); }, {3, 4}, {4});
  binary("add-scalar", [](Var a, Var b) { return ops::add(a, b); }, {3, 4}, {});
  binary("multiply", [](Var a, Var b) { return ops::multiply(a, b); }, {3, 4}, {3, 4});
  binary("multiply-scalar", [](Var a, Var b) { return ops::multiply(a, b); }, {3, 4}, {});
  binary("divide", [](Var a, Var b) { return ops::divide(a, b); }, {3, 4}, {3, 4}, true);
  binary("divide-scalar", [](Var a, Var b) { return ops::divide(a, b); }, {3, 4}, {}, true);
  binary("concat-last-axis", [](Var a, Var b) { return ops::concat_cols(a, b); }, {3, 2}, {3, 4});
  return rep;
}

// The training losses, checked against central differences with respect to
// every input (criterion: h = 1e-6, relative error < 1e-5).
inline oracle::OracleReport gradcheck_losses(std::uint64_t seed, int trials = 50) {
  namespace d = gradcheck_detail;
  oracle::OracleReport rep;
  Rng rng(mix_seed(seed, 11));
  const double h = 1e-6;
  const std::int64_t b = 4, du = 2, c = 3;

  d::run_check(rep, "loss-l2-domain", rng, trials, [&](Rng& r) {
    return grad_check_multi(
        [](Tape& t, std::vector<Var>& v) { return losses::l2_domain_loss(t, v[0], v[1]); },
        {d::randn(r, {b, du}), d::randn(r, {b, du})}, h);
  });

  d::run_check(rep, "loss-gaussian-nll", rng, trials, [&](Rng& r) {
    return grad_check_multi(
        [](Tape& t, std::vector<Var>& v) {
          return losses::gaussian_nll_loss(t, v[0], v[1], v[2]);
        },
        {d::randn(r, {b, du}), d::rand_positive(r, {b, du}), d::randn(r, {b, du})}, h);
  });

  for (std::int64_t k : {1, 2, 3}) {
    // through the mixture-weight softmax (the trained path)
    d::run_check(rep, "loss-gmm-nll-k" + std::to_string(k) + "-logits", rng, trials,
                 [&, k](Rng& r) {
                   return grad_check_multi(
                       [k](Tape& t, std::vector<Var>& v) {
                         return losses::gmm_nll_loss(t, ops::softmax(v[0]), v[1], v[2], v[3]);
                       },
                       {d::randn(r, {b, k}), d::randn(r, {b, k, du}),
                        d::rand_positive(r, {b, k, du}), d::randn(r, {b, du})},
                       h);
                 });
    // directly with respect to the mixture weights
    d::run_check(rep, "loss-gmm-nll-k" + std::to_string(k) + "-pi", rng, trials, [&, k](Rng& r) {
      Tensor logits = d::randn(r, {b, k});
      Tensor pi(Shape{b, k});
      for (std::int64_t i = 0; i < b; ++i) {
        double mx = logits.at(i, 0);
        for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
        double s = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
          pi.at(i, j) = std::exp(logits.at(i, j) - mx);
          s += pi.at(i, j);
        }
        for (std::int64_t j = 0; j < k; ++j) pi.at(i, j) /= s;
      }
      return grad_check_multi(
          [](Tape& t, std::vector<Var>& v) {
            return losses::gmm_nll_loss(t, v[0], v[1], v[2], v[3]);
          },
          {pi, d::randn(r, {b, k, du}), d::rand_positive(r, {b, k, du}), d::randn(r, {b, du})},
          h);
    });
  }

  d::run_check(rep, "loss-cross-entropy", rng, trials, [&](Rng& r) {
    std::vector<std::int64_t> labels;
    for (std::int64_t i = 0; i < b; ++i)
      labels.push_back(static_cast<std::int64_t>(r.uniform_int(c)));
    return grad_check_multi(
        [labels](Tape& t, std::vector<Var>& v) {
          return losses::prediction_loss(t, v[0], labels);
        },
        {d::randn(r, {b, c}, 2.0)}, h);
  });

  // Gaussian NLL through the discriminator head: raw head outputs and the
  // encoding path.
  d::run_check(rep, "loss-gaussian-head-path", rng, trials, [&](Rng& r) {
    Tensor u = d::randn(r, {b, du});
    return grad_check_multi(
        [du, &u](Tape& t, std::vector<Var>& v) {
          Var mu = ops::slice_cols(v[0], 0, du);
          Var var = ops::shift(ops::softplus(ops::slice_cols(v[0], du, du)), kVarFloor);
          return losses::gaussian_nll_loss(t, mu, var, t.input(u));
        },
        {d::randn(r, {b, 2 * du})}, h);
  });
  d::run_check(rep, "loss-gaussian-z-path", rng, trials, [&](Rng& r) {
    DiscriminatorD disc = DiscriminatorD::make(DiscKind::Gaussian, 6, du, {8}, Activation::Tanh,
                                               r.next_u64());
    Tensor u = d::randn(r, {b, du});
    return grad_check_multi(
        [&disc, &u](Tape& t, std::vector<Var>& v) {
          DiscOutput head = disc.forward(t, v[0], /*frozen=*/true);
          return losses::gaussian_nll_loss(t, head.mu, head.var, t.input(u));
        },
        {d::randn(r, {b, 6})}, h);
  });
  return rep;
}

inline oracle::OracleReport gradcheck_suite(std::uint64_t seed) {
  oracle::OracleReport rep;
  rep.merge(gradcheck_primitives(seed));
  rep.merge(gradcheck_losses(seed));
  return rep;
}

}  // namespace cida
