#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "cida/oracle.hpp"

// Batched oracle runs behind the `oracle --suite` CLI surface. Every check
// prints one PASS/FAIL line; suites are deterministic in the seed.

namespace cida::oracle {

namespace detail {
inline std::string tag(const char* base, int j) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s-j%02d", base, j);
  return buf;
}

// The worked two-symbol joint used across the discriminator checks:
// z in {a,b} equiprobable, u|a uniform{0,1}, u|b fixed at 1.
inline DiscreteJoint two_symbol_joint() {
  DiscreteJoint j;
  j.n_z = 2;
  j.u_values = {0.0, 1.0};
  j.p = {0.25, 0.25,
         0.0, 0.5};
  return j;
}
}  // namespace detail

// Brute-force optimal-discriminator checks (point and Gaussian heads).
inline OracleReport suite_lemmas(std::uint64_t seed) {
  OracleReport rep;

  {
    auto j = detail::two_symbol_joint();
    auto ps = verify_optimal_point_discriminator(j, make_grid(-1.0, 2.0, 0.01));
    rep.check_close("point-disc-example-argmin-a", ps.argmin[0], 0.50, 1e-9);
    rep.check_close("point-disc-example-argmin-b", ps.argmin[1], 1.00, 1e-9);
    rep.check_true("point-disc-example-unique", ps.unique_min && ps.nearest);
  }

  Rng rng(mix_seed(seed, 41));
  const double step = 1e-3;
  for (int k = 0; k < 50; ++k) {
    DiscreteJoint j = random_joint(rng, 6, 6);
    const MomentTable t = moments(j);
    double u_lo = j.u_values.front(), u_hi = j.u_values.back();
    double v_hi = 0.0;
    for (double v : t.v_u_given_z) v_hi = std::max(v_hi, v);

    auto ps = verify_optimal_point_discriminator(j, make_grid(u_lo - 0.05, u_hi + 0.05, step));
    rep.check_close(detail::tag("point-disc-argmin", k), ps.max_dev, 0.0, step);
    rep.check_true(detail::tag("point-disc-nearest", k), ps.nearest && ps.unique_min);
    rep.check_le(detail::tag("point-disc-analytic-min", k), ps.max_analytic_excess, 0.0, 1e-12);

    auto gs = verify_optimal_gaussian_discriminator(
        j, make_grid(u_lo - 0.05, u_hi + 0.05, step),
        make_grid(0.5 * step, v_hi + 0.05, step));
    rep.check_close(detail::tag("gauss-disc-mu-argmin", k), gs.max_mu_dev, 0.0, step);
    rep.check_close(detail::tag("gauss-disc-var-argmin", k), gs.max_var_dev, 0.0, step);
    rep.check_le(detail::tag("gauss-disc-analytic-min", k), gs.max_analytic_excess, 0.0, 1e-12);
    rep.check_close(detail::tag("gauss-disc-optimum-identity", k), gs.max_identity_dev, 0.0, 1e-12);
  }
  return rep;
}

// Virtual-criterion bounds, equality cases, and the three-player
// construction checks.
inline OracleReport suite_theorems(std::uint64_t seed) {
  OracleReport rep;
  Rng rng(mix_seed(seed, 42));

  double cida_excess = -1e300, cida_tv_dev = 0.0, pcida_excess = -1e300;
  for (int k = 0; k < 200; ++k) {
    DiscreteJoint j = random_joint(rng, 8, 8);
    try {
      auto c = cida_criterion(j);
      cida_excess = std::max(cida_excess, c.c_d - c.bound);
      cida_tv_dev = std::max(cida_tv_dev, std::abs(c.gap - c.mean_var));
      auto p = pcida_criterion(j);
      pcida_excess = std::max(pcida_excess, p.c_d - p.bound);
    } catch (const Error& e) {
      rep.fail(detail::tag("criterion-random", k), e.what());
    }
  }
  rep.check_le("cida-bound-random200", cida_excess, 0.0, 1e-12);
  rep.check_close("cida-total-variance-random200", cida_tv_dev, 0.0, 1e-12);
  rep.check_le("pcida-bound-random200", pcida_excess, 0.0, 1e-12);

  double prod_gap = 0.0, prod_mean_dev = 0.0, prod_var_dev = 0.0, prod_pgap = 0.0;
  for (int k = 0; k < 50; ++k) {
    DiscreteJoint j = random_product_joint(rng, 8, 8);
    try {
      auto c = cida_criterion(j);
      prod_gap = std::max(prod_gap, std::abs(c.gap));
      auto p = pcida_criterion(j);
      prod_pgap = std::max(prod_pgap, std::abs(p.gap));
      const MomentTable t = moments(j);
      for (std::size_t z = 0; z < t.p_z.size(); ++z) {
        prod_mean_dev = std::max(prod_mean_dev, std::abs(t.e_u_given_z[z] - t.e_u));
        prod_var_dev = std::max(prod_var_dev, std::abs(t.v_u_given_z[z] - t.v_u));
      }
    } catch (const Error& e) {
      rep.fail(detail::tag("criterion-product", k), e.what());
    }
  }
  rep.check_close("cida-product-gap", prod_gap, 0.0, 1e-12);
  rep.check_close("pcida-product-gap", prod_pgap, 0.0, 1e-12);
  rep.check_close("constant-mean-forces-marginal", prod_mean_dev, 0.0, 1e-12);
  rep.check_close("constant-var-forces-marginal", prod_var_dev, 0.0, 1e-12);

  {
    // independent z with u uniform on {1,2,3,4}
    DiscreteJoint j;
    j.n_z = 2;
    j.u_values = {1.0, 2.0, 3.0, 4.0};
    j.p = {0.15, 0.15, 0.15, 0.15,
           0.10, 0.10, 0.10, 0.10};
    auto c = cida_criterion(j);
    rep.check_close("cida-uniform4-value", c.c_d, 1.25, 1e-12);
    rep.check_close("cida-uniform4-gap", c.gap, 0.0, 1e-12);
    auto p = pcida_criterion(j);
    rep.check_close("pcida-uniform4-value", p.c_d, 0.5 + 0.5 * std::log(1.25), 1e-12);
    rep.check_close("pcida-uniform4-gap", p.gap, 0.0, 1e-12);
  }

  {
    // constant conditional mean but unequal conditional variances: the
    // Gaussian criterion stays strictly below its bound (Jensen on log).
    DiscreteJoint j;
    j.n_z = 2;
    j.u_values = {-2.0, -1.0, 0.0, 1.0, 2.0};
    j.p = {0.0, 0.25, 0.0, 0.25, 0.0,
           0.125, 0.0, 0.25, 0.0, 0.125};
    auto c = cida_criterion(j);
    rep.check_close("cida-equal-means-gap", c.gap, 0.0, 1e-12);
    auto p = pcida_criterion(j);
    rep.check_le("pcida-strict-gap", 0.01, p.gap, 0.0);
  }

  double table_dev = 0.0, min_margin = 1e300;
  double hyz_dev = 0.0, align_dev = 0.0, game_gap = 0.0;
  for (int k = 0; k < 50; ++k) {
    DiscreteJoint j = random_labeled_product_joint(rng, 4, 4, 3);
    try {
      auto pb = predictor_bound(j, rng, 100);
      table_dev = std::max(table_dev, std::abs(pb.table_loss - pb.h_y_given_z));
      min_margin = std::min(min_margin, pb.min_random_margin);
      auto fg = full_game_construction(j);
      hyz_dev = std::max(hyz_dev, std::abs(fg.h_y_given_z - fg.h_y_given_xu));
      align_dev = std::max(align_dev, fg.max_alignment_dev);
      game_gap = std::max(game_gap, std::abs(fg.cida_gap));
    } catch (const Error& e) {
      rep.fail(detail::tag("fullgame-random", k), e.what());
    }
  }
  rep.check_close("predictor-table-attains-entropy", table_dev, 0.0, 1e-12);
  rep.check_true("predictor-random-domination", min_margin > 0.0);
  rep.check_close("fullgame-entropy-preserved", hyz_dev, 0.0, 1e-12);
  rep.check_close("fullgame-alignment", align_dev, 0.0, 1e-12);
  rep.check_close("fullgame-criterion-gap", game_gap, 0.0, 1e-12);
  return rep;
}

// Direction-of-matching comparison: moment-matching p(u|z) everywhere is the
// stronger constraint set.
inline OracleReport suite_appendix() {
  OracleReport rep;
  try {
    auto demo = alignment_strength_demo();
    rep.check_close("alignment-demo-z-mean-match", demo.z_mean_dev, 0.0, 1e-12);
    rep.check_close("alignment-demo-z-var-match", demo.z_var_dev, 0.0, 1e-12);
    rep.check_le("alignment-demo-u-mean-varies", 0.5, demo.e_u_spread, 0.0);
  } catch (const Error& e) {
    rep.fail("alignment-demo", e.what());
  }
  auto big = moment_constraint_counts(std::pow(4.0, 100.0), 4.0, 100.0, 1.0);
  rep.check_close("moment-count-u-given-z", big.first, 2.0 * std::pow(4.0, 100.0), 0.0);
  rep.check_close("moment-count-z-given-u", big.second, 800.0, 0.0);
  auto small = moment_constraint_counts(2.0, 2.0, 1.0, 1.0);
  rep.check_close("moment-count-small-uz", small.first, 4.0, 0.0);
  rep.check_close("moment-count-small-zu", small.second, 4.0, 0.0);
  return rep;
}

inline OracleReport oracle_suite(const std::string& which, std::uint64_t seed) {
  OracleReport rep;
  if (which == "lemmas" || which == "all") rep.merge(suite_lemmas(seed));
  if (which == "theorems" || which == "all") rep.merge(suite_theorems(seed));
  if (which == "appendix" || which == "all") rep.merge(suite_appendix());
  if (rep.lines.empty()) throw UsageError("oracle: unknown suite '" + which + "'");
  return rep;
}

}  // namespace cida::oracle
