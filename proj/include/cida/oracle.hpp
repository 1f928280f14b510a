#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cida/error.hpp"
#include "cida/rng.hpp"

// Exact verification of the equilibrium theory on small finite joint
// distributions: optimal-discriminator brute-force searches, the virtual
// training criteria and their bounds, the optimal-predictor entropy bound,
// and the posterior-table encoder construction for the full game.

namespace cida::oracle {

// Finite joint over (z, u) or, when n_y > 0, (z, u, y). The first axis is a
// symbol alphabet (encodings, or raw inputs for the full-game check); u
// carries real values; z may optionally carry real embeddings for checks
// that need moments of z itself.
struct DiscreteJoint {
  std::int64_t n_z = 0;
  std::vector<double> u_values;
  std::int64_t n_y = 0;  // 0 when there is no label axis
  std::vector<double> z_embed;
  std::vector<double> p;  // row-major [z][u] or [z][u][y]

  std::int64_t n_u() const { return static_cast<std::int64_t>(u_values.size()); }

  double& at(std::int64_t z, std::int64_t u) {
    return p[static_cast<std::size_t>(z * n_u() + u)];
  }
  double at(std::int64_t z, std::int64_t u) const {
    return p[static_cast<std::size_t>(z * n_u() + u)];
  }
  double& at(std::int64_t z, std::int64_t u, std::int64_t y) {
    return p[static_cast<std::size_t>((z * n_u() + u) * n_y + y)];
  }
  double at(std::int64_t z, std::int64_t u, std::int64_t y) const {
    return p[static_cast<std::size_t>((z * n_u() + u) * n_y + y)];
  }

  // Mass of a (z,u) cell with any label axis summed out.
  double cell_zu(std::int64_t z, std::int64_t u) const {
    if (n_y == 0) return at(z, u);
    double s = 0.0;
    for (std::int64_t y = 0; y < n_y; ++y) s += at(z, u, y);
    return s;
  }

  void validate() const {
    const std::size_t want = static_cast<std::size_t>(n_z * n_u() * std::max<std::int64_t>(n_y, 1));
    if (p.size() != want) throw ShapeError("joint: probability table size mismatch");
    double total = 0.0;
    for (double v : p) {
      if (v < 0.0) throw DataError("joint: negative probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw DataError("joint: probabilities sum to " + std::to_string(total));
  }
};

struct MomentTable {
  std::vector<double> p_z;
  std::vector<double> e_u_given_z;
  std::vector<double> v_u_given_z;
  double e_u = 0.0;
  double v_u = 0.0;
};

// Exact conditional/marginal means and variances by summation (two-pass form
// for the variances).
inline MomentTable moments(const DiscreteJoint& joint) {
  joint.validate();
  const std::int64_t nz = joint.n_z, nu = joint.n_u();
  MomentTable t;
  t.p_z.resize(static_cast<std::size_t>(nz));
  t.e_u_given_z.resize(static_cast<std::size_t>(nz));
  t.v_u_given_z.resize(static_cast<std::size_t>(nz));

  std::vector<double> p_u(static_cast<std::size_t>(nu), 0.0);
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t u = 0; u < nu; ++u) {
      const double m = joint.cell_zu(z, u);
      t.p_z[static_cast<std::size_t>(z)] += m;
      p_u[static_cast<std::size_t>(u)] += m;
    }

  for (std::int64_t u = 0; u < nu; ++u)
    t.e_u += p_u[static_cast<std::size_t>(u)] * joint.u_values[static_cast<std::size_t>(u)];
  for (std::int64_t u = 0; u < nu; ++u) {
    const double d = joint.u_values[static_cast<std::size_t>(u)] - t.e_u;
    t.v_u += p_u[static_cast<std::size_t>(u)] * d * d;
  }

  for (std::int64_t z = 0; z < nz; ++z) {
    const double pz = t.p_z[static_cast<std::size_t>(z)];
    if (pz <= 0.0) throw DataError("moments: zero-mass z value " + std::to_string(z));
    double mean = 0.0;
    for (std::int64_t u = 0; u < nu; ++u)
      mean += joint.cell_zu(z, u) * joint.u_values[static_cast<std::size_t>(u)];
    mean /= pz;
    double var = 0.0;
    for (std::int64_t u = 0; u < nu; ++u) {
      const double d = joint.u_values[static_cast<std::size_t>(u)] - mean;
      var += joint.cell_zu(z, u) * d * d;
    }
    var /= pz;
    t.e_u_given_z[static_cast<std::size_t>(z)] = mean;
    t.v_u_given_z[static_cast<std::size_t>(z)] = var;
  }
  return t;
}

// ---- reporting ---------------------------------------------------------

struct CheckLine {
  bool pass = false;
  std::string name;
  double lhs = 0.0, rhs = 0.0, tol = 0.0;
};

struct OracleReport {
  std::vector<CheckLine> lines;

  // |lhs - rhs| <= tol
  void check_close(const std::string& name, double lhs, double rhs, double tol) {
    lines.push_back({std::abs(lhs - rhs) <= tol, name, lhs, rhs, tol});
  }
  // lhs <= rhs + tol
  void check_le(const std::string& name, double lhs, double rhs, double tol) {
    lines.push_back({lhs <= rhs + tol, name, lhs, rhs, tol});
  }
  void check_true(const std::string& name, bool ok) {
    lines.push_back({ok, name, ok ? 1.0 : 0.0, 1.0, 0.0});
  }
  void fail(const std::string& name, const std::string& why) {
    lines.push_back({false, name + "(" + why + ")", 0.0, 0.0, 0.0});
  }
  void merge(const OracleReport& other) {
    lines.insert(lines.end(), other.lines.begin(), other.lines.end());
  }
  bool all_pass() const {
    for (const auto& l : lines)
      if (!l.pass) return false;
    return true;
  }
  std::size_t fail_count() const {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.pass ? 0 : 1;
    return n;
  }
  void print(std::ostream& out) const {
    char buf[160];
    for (const auto& l : lines) {
      std::snprintf(buf, sizeof(buf), "%s %s %.12g %.12g %.12g", l.pass ? "PASS" : "FAIL",
                    l.name.c_str(), l.lhs, l.rhs, l.tol);
      out << buf << "\n";
    }
  }
};

// ---- optimal discriminators by brute force ---------------------------------

inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (step <= 0.0 || hi < lo) throw Error("make_grid: bad range");
  std::vector<double> g;
  for (double v = lo; v <= hi + step * 1e-9; v += step) g.push_back(v);
  return g;
}

struct PointSearch {
  std::vector<double> argmin;     // grid minimizer per z
  std::vector<double> min_loss;   // expected loss at the grid minimizer
  std::vector<double> cond_mean;  // E[u|z]
  double max_dev = 0.0;           // max_z |argmin - E[u|z]|
  bool nearest = true;            // argmin is the grid point nearest E[u|z]
  bool unique_min = true;
  double max_analytic_excess = -1e300;  // max_z (analytic loss - grid min)
};

// Expected L2 loss per candidate output, enumerated per z; confirms the grid
// minimizer sits at the grid point nearest E[u|z], uniquely, and that the
// analytic minimizer E[u|z] attains a loss no worse than every candidate.
inline PointSearch verify_optimal_point_discriminator(const DiscreteJoint& joint,
                                                      const std::vector<double>& grid) {
  if (grid.empty()) throw Error("point search: empty grid");
  const MomentTable t = moments(joint);
  const std::int64_t nz = joint.n_z, nu = joint.n_u();
  PointSearch out;
  out.cond_mean = t.e_u_given_z;
  for (std::int64_t z = 0; z < nz; ++z) {
    const double pz = t.p_z[static_cast<std::size_t>(z)];
    double best = 1e300;
    std::size_t best_i = 0;
    bool unique = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double loss = 0.0;
      for (std::int64_t u = 0; u < nu; ++u) {
        const double d = grid[i] - joint.u_values[static_cast<std::size_t>(u)];
        loss += joint.cell_zu(z, u) / pz * d * d;
      }
      if (loss < best) {
        best = loss;
        best_i = i;
        unique = true;
      } else if (loss == best && i != best_i) {
        unique = false;
      }
    }
    const double e = t.e_u_given_z[static_cast<std::size_t>(z)];
    std::size_t nearest_i = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - e) < std::abs(grid[nearest_i] - e)) nearest_i = i;
    out.argmin.push_back(grid[best_i]);
    out.min_loss.push_back(best);
    out.max_dev = std::max(out.max_dev, std::abs(grid[best_i] - e));
    out.nearest = out.nearest && best_i == nearest_i;
    out.unique_min = out.unique_min && unique;
    // analytic minimizer attains V[u|z]
    double analytic = 0.0;
    for (std::int64_t u = 0; u < nu; ++u) {
      const double d = e - joint.u_values[static_cast<std::size_t>(u)];
      analytic += joint.cell_zu(z, u) / pz * d * d;
    }
    out.max_analytic_excess = std::max(out.max_analytic_excess, analytic - best);
  }
  return out;
}

struct GaussianSearch {
  std::vector<double> argmin_mu, argmin_var;
  std::vector<double> cond_mean, cond_var;
  double max_mu_dev = 0.0, max_var_dev = 0.0;
  double max_analytic_excess = -1e300;  // (0.5 + 0.5 log V[u|z]) - grid min
  double max_identity_dev = 0.0;        // enumerated loss at (E,V) vs closed form
};

// Expected Gaussian-NLL loss over a (mu, var) candidate grid. The minimizer
// must be (E[u|z], V[u|z]); requires V[u|z] > 0 (the loss has no optimum at
// collapsed conditionals).
inline GaussianSearch verify_optimal_gaussian_discriminator(
    const DiscreteJoint& joint, const std::vector<double>& mu_grid,
    const std::vector<double>& var_grid_in) {
  if (mu_grid.empty() || var_grid_in.empty()) throw Error("gaussian search: empty grid");
  std::vector<double> var_grid;
  for (double v : var_grid_in)
    if (v > 0.0) var_grid.push_back(v);
  if (var_grid.empty()) throw Error("gaussian search: no positive variance candidates");

  const MomentTable t = moments(joint);
  const std::int64_t nz = joint.n_z, nu = joint.n_u();
  GaussianSearch out;
  out.cond_mean = t.e_u_given_z;
  out.cond_var = t.v_u_given_z;

  std::vector<double> half_log(var_grid.size());
  for (std::size_t i = 0; i < var_grid.size(); ++i) half_log[i] = 0.5 * std::log(var_grid[i]);

  for (std::int64_t z = 0; z < nz; ++z) {
    const double pz = t.p_z[static_cast<std::size_t>(z)];
    const double e = t.e_u_given_z[static_cast<std::size_t>(z)];
    const double v = t.v_u_given_z[static_cast<std::size_t>(z)];
    if (v <= 0.0)
      throw NumericError("gaussian search: degenerate conditional variance at z=" +
                         std::to_string(z));

    // quad(mu) = E[(mu-u)^2 | z], enumerated
    std::vector<double> quad(mu_grid.size(), 0.0);
    for (std::size_t i = 0; i < mu_grid.size(); ++i)
      for (std::int64_t u = 0; u < nu; ++u) {
        const double d = mu_grid[i] - joint.u_values[static_cast<std::size_t>(u)];
        quad[i] += joint.cell_zu(z, u) / pz * d * d;
      }

    double best = 1e300;
    std::size_t bi = 0, bj = 0;
    for (std::size_t j = 0; j < var_grid.size(); ++j) {
      const double inv2 = 0.5 / var_grid[j];
      for (std::size_t i = 0; i < mu_grid.size(); ++i) {
        const double loss = quad[i] * inv2 + half_log[j];
        if (loss < best) {
          best = loss;
          bi = i;
          bj = j;
        }
      }
    }
    out.argmin_mu.push_back(mu_grid[bi]);
    out.argmin_var.push_back(var_grid[bj]);
    out.max_mu_dev = std::max(out.max_mu_dev, std::abs(mu_grid[bi] - e));
    out.max_var_dev = std::max(out.max_var_dev, std::abs(var_grid[bj] - v));

    // enumerated loss at the analytic optimum, against the closed form
    double quad_e = 0.0;
    for (std::int64_t u = 0; u < nu; ++u) {
      const double d = e - joint.u_values[static_cast<std::size_t>(u)];
      quad_e += joint.cell_zu(z, u) / pz * d * d;
    }
    const double analytic = quad_e / (2.0 * v) + 0.5 * std::log(v);
    const double closed = 0.5 + 0.5 * std::log(v);
    out.max_identity_dev = std::max(out.max_identity_dev, std::abs(analytic - closed));
    out.max_analytic_excess = std::max(out.max_analytic_excess, closed - best);
  }
  return out;
}

// ---- virtual training criteria ---------------------------------------------

struct CriterionResult {
  double c_d = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  double mean_var = 0.0;  // CIDA only: variance of the conditional means
};

// C_d = E_z V[u|z], bounded by V[u]; the gap equals the variance of the
// conditional means (law of total variance), and vanishes exactly when
// E[u|z] is constant in z.
inline CriterionResult cida_criterion(const DiscreteJoint& joint) {
  const MomentTable t = moments(joint);
  CriterionResult r;
  for (std::size_t z = 0; z < t.p_z.size(); ++z) r.c_d += t.p_z[z] * t.v_u_given_z[z];
  r.bound = t.v_u;
  r.gap = r.bound - r.c_d;
  if (r.c_d > r.bound + 1e-12)
    throw OracleError("cida_criterion: C_d exceeds V[u] (" + std::to_string(r.c_d) + " > " +
                      std::to_string(r.bound) + ")");
  for (std::size_t z = 0; z < t.p_z.size(); ++z) {
    const double d = t.e_u_given_z[z] - t.e_u;
    r.mean_var += t.p_z[z] * d * d;
  }
  if (std::abs(r.gap - r.mean_var) > 1e-12)
    throw OracleError("cida_criterion: total-variance decomposition violated by " +
                      std::to_string(std::abs(r.gap - r.mean_var)));
  return r;
}

// C_d = 1/2 + 1/2 E_z log V[u|z], bounded by 1/2 + 1/2 log V[u]; equality
// requires both conditional moments constant in z.
inline CriterionResult pcida_criterion(const DiscreteJoint& joint) {
  const MomentTable t = moments(joint);
  CriterionResult r;
  for (std::size_t z = 0; z < t.p_z.size(); ++z) {
    if (t.v_u_given_z[z] <= 0.0)
      throw NumericError("pcida_criterion: degenerate conditional variance at z=" +
                         std::to_string(z));
    r.c_d += t.p_z[z] * std::log(t.v_u_given_z[z]);
  }
  r.c_d = 0.5 + 0.5 * r.c_d;
  r.bound = 0.5 + 0.5 * std::log(t.v_u);
  r.gap = r.bound - r.c_d;
  if (r.c_d > r.bound + 1e-12)
    throw OracleError("pcida_criterion: C_d exceeds bound by " + std::to_string(-r.gap));
  return r;
}

// ---- optimal predictor -------------------------------------------------

struct PredictorBoundResult {
  double h_y_given_z = 0.0;
  double table_loss = 0.0;        // expected cross-entropy of F(z) = p(.|z)
  double min_random_margin = 0.0; // min over random predictors of (their loss - table loss)
};

// H(y|z) in nats; the table predictor attains it exactly and no random
// stochastic predictor does better (Gibbs' inequality, checked empirically).
inline PredictorBoundResult predictor_bound(const DiscreteJoint& joint, Rng& rng,
                                            int n_random = 100) {
  if (joint.n_y < 2) throw DataError("predictor_bound: joint has no label axis");
  joint.validate();
  const std::int64_t nz = joint.n_z, nu = joint.n_u(), ny = joint.n_y;

  std::vector<double> p_zy(static_cast<std::size_t>(nz * ny), 0.0);
  std::vector<double> p_z(static_cast<std::size_t>(nz), 0.0);
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t u = 0; u < nu; ++u)
      for (std::int64_t y = 0; y < ny; ++y) {
        p_zy[static_cast<std::size_t>(z * ny + y)] += joint.at(z, u, y);
        p_z[static_cast<std::size_t>(z)] += joint.at(z, u, y);
      }

  PredictorBoundResult r;
  // entropy form: -sum_z p(z) sum_y p(y|z) log p(y|z)
  for (std::int64_t z = 0; z < nz; ++z) {
    if (p_z[static_cast<std::size_t>(z)] <= 0.0)
      throw DataError("predictor_bound: zero-mass z value " + std::to_string(z));
    for (std::int64_t y = 0; y < ny; ++y) {
      const double cond = p_zy[static_cast<std::size_t>(z * ny + y)] / p_z[static_cast<std::size_t>(z)];
      if (cond > 0.0) r.h_y_given_z -= p_z[static_cast<std::size_t>(z)] * cond * std::log(cond);
    }
  }
  // expectation form: -sum_{z,y} p(z,y) log F(z)_y with F(z) = p(.|z)
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t y = 0; y < ny; ++y) {
      const double mass = p_zy[static_cast<std::size_t>(z * ny + y)];
      if (mass > 0.0)
        r.table_loss -= mass * std::log(mass / p_z[static_cast<std::size_t>(z)]);
    }
  if (std::abs(r.table_loss - r.h_y_given_z) > 1e-12)
    throw OracleError("predictor_bound: table predictor does not attain H(y|z)");

  r.min_random_margin = 1e300;
  for (int k = 0; k < n_random; ++k) {
    // random stochastic predictor: Dirichlet(1) row per z
    std::vector<double> q(static_cast<std::size_t>(nz * ny));
    for (std::int64_t z = 0; z < nz; ++z) {
      double s = 0.0;
      for (std::int64_t y = 0; y < ny; ++y) {
        const double e = -std::log(1.0 - rng.uniform());
        q[static_cast<std::size_t>(z * ny + y)] = e;
        s += e;
      }
      for (std::int64_t y = 0; y < ny; ++y) q[static_cast<std::size_t>(z * ny + y)] /= s;
    }
    double loss = 0.0;
    for (std::int64_t z = 0; z < nz; ++z)
      for (std::int64_t y = 0; y < ny; ++y) {
        const double mass = p_zy[static_cast<std::size_t>(z * ny + y)];
        if (mass > 0.0) loss -= mass * std::log(q[static_cast<std::size_t>(z * ny + y)]);
      }
    r.min_random_margin = std::min(r.min_random_margin, loss - r.table_loss);
  }
  if (r.min_random_margin < -1e-12)
    throw OracleError("predictor_bound: a random predictor beat the table predictor");
  return r;
}

// ---- full three-player construction -----------------------------------

struct FullGameResult {
  double h_y_given_xu = 0.0;
  double h_y_given_z = 0.0;
  double max_alignment_dev = 0.0;  // max |p(z|u) - p(z)|
  double cida_gap = 0.0;           // gap of the induced (z,u) joint
  std::int64_t n_groups = 0;       // distinct posterior vectors
};

// Builds the posterior-table encoder z = p(.|x,u) over a joint on (x,u,y)
// with u independent of y, then verifies that prediction power is preserved
// (H(y|z) = H(y|x,u)) and that the encoding is exactly index-independent, so
// the virtual criterion attains its bound. Joints where u is dependent on y
// are rejected.
inline FullGameResult full_game_construction(const DiscreteJoint& joint,
                                             double group_tol = 1e-9) {
  if (joint.n_y < 2) throw DataError("full_game: joint has no label axis");
  joint.validate();
  const std::int64_t nx = joint.n_z, nu = joint.n_u(), ny = joint.n_y;

  // reject dependence between u and y
  std::vector<double> p_u(static_cast<std::size_t>(nu), 0.0), p_y(static_cast<std::size_t>(ny), 0.0);
  std::vector<double> p_uy(static_cast<std::size_t>(nu * ny), 0.0);
  for (std::int64_t x = 0; x < nx; ++x)
    for (std::int64_t u = 0; u < nu; ++u)
      for (std::int64_t y = 0; y < ny; ++y) {
        const double m = joint.at(x, u, y);
        p_u[static_cast<std::size_t>(u)] += m;
        p_y[static_cast<std::size_t>(y)] += m;
        p_uy[static_cast<std::size_t>(u * ny + y)] += m;
      }
  double dep = 0.0;
  for (std::int64_t u = 0; u < nu; ++u)
    for (std::int64_t y = 0; y < ny; ++y)
      dep = std::max(dep, std::abs(p_uy[static_cast<std::size_t>(u * ny + y)] -
                                   p_u[static_cast<std::size_t>(u)] * p_y[static_cast<std::size_t>(y)]));
  if (dep > 1e-9)
    throw DataError("full_game: u and y are dependent (max deviation " + std::to_string(dep) +
                    ")");

  FullGameResult r;
  // group (x,u) cells by their posterior vector p(.|x,u)
  std::vector<std::vector<double>> reps;  // representative posteriors
  std::vector<double> group_mass;         // p(z)
  std::vector<double> group_u_mass;       // p(z,u) row-major [group][u]
  std::vector<std::vector<double>> group_y_mass;  // p(z,y)

  for (std::int64_t x = 0; x < nx; ++x)
    for (std::int64_t u = 0; u < nu; ++u) {
      double mass = 0.0;
      for (std::int64_t y = 0; y < ny; ++y) mass += joint.at(x, u, y);
      if (mass <= 0.0) continue;
      std::vector<double> post(static_cast<std::size_t>(ny));
      for (std::int64_t y = 0; y < ny; ++y) {
        post[static_cast<std::size_t>(y)] = joint.at(x, u, y) / mass;
        if (post[static_cast<std::size_t>(y)] > 0.0)
          r.h_y_given_xu -= joint.at(x, u, y) * std::log(post[static_cast<std::size_t>(y)]);
      }
      std::size_t g = reps.size();
      for (std::size_t k = 0; k < reps.size(); ++k) {
        double dev = 0.0;
        for (std::int64_t y = 0; y < ny; ++y)
          dev = std::max(dev, std::abs(reps[k][static_cast<std::size_t>(y)] -
                                       post[static_cast<std::size_t>(y)]));
        if (dev <= group_tol) {
          g = k;
          break;
        }
      }
      if (g == reps.size()) {
        reps.push_back(post);
        group_mass.push_back(0.0);
        group_u_mass.resize(group_u_mass.size() + static_cast<std::size_t>(nu), 0.0);
        group_y_mass.emplace_back(static_cast<std::size_t>(ny), 0.0);
      }
      group_mass[g] += mass;
      group_u_mass[g * static_cast<std::size_t>(nu) + static_cast<std::size_t>(u)] += mass;
      for (std::int64_t y = 0; y < ny; ++y)
        group_y_mass[g][static_cast<std::size_t>(y)] += joint.at(x, u, y);
    }
  r.n_groups = static_cast<std::int64_t>(reps.size());

  // H(y|z) from the induced (z,y) table
  for (std::size_t g = 0; g < reps.size(); ++g)
    for (std::int64_t y = 0; y < ny; ++y) {
      const double m = group_y_mass[g][static_cast<std::size_t>(y)];
      if (m > 0.0) r.h_y_given_z -= m * std::log(m / group_mass[g]);
    }
  if (std::abs(r.h_y_given_z - r.h_y_given_xu) > 1e-12)
    throw OracleError("full_game: H(y|z) != H(y|x,u), deviation " +
                      std::to_string(std::abs(r.h_y_given_z - r.h_y_given_xu)));

  // exact index independence: p(z|u) = p(z) for every u
  for (std::int64_t u = 0; u < nu; ++u) {
    if (p_u[static_cast<std::size_t>(u)] <= 0.0) continue;
    for (std::size_t g = 0; g < reps.size(); ++g) {
      const double cond = group_u_mass[g * static_cast<std::size_t>(nu) +
                                       static_cast<std::size_t>(u)] /
                          p_u[static_cast<std::size_t>(u)];
      r.max_alignment_dev = std::max(r.max_alignment_dev, std::abs(cond - group_mass[g]));
    }
  }
  if (r.max_alignment_dev > 1e-12)
    throw OracleError("full_game: encoding is not index-independent, deviation " +
                      std::to_string(r.max_alignment_dev));

  // the induced joint attains the CIDA bound (total alignment)
  DiscreteJoint zu;
  zu.n_z = r.n_groups;
  zu.u_values = joint.u_values;
  zu.p.assign(static_cast<std::size_t>(zu.n_z * nu), 0.0);
  for (std::size_t g = 0; g < reps.size(); ++g)
    for (std::int64_t u = 0; u < nu; ++u)
      zu.at(static_cast<std::int64_t>(g), u) =
          group_u_mass[g * static_cast<std::size_t>(nu) + static_cast<std::size_t>(u)];
  r.cida_gap = cida_criterion(zu).gap;
  if (std::abs(r.cida_gap) > 1e-12)
    throw OracleError("full_game: induced joint misses the CIDA bound by " +
                      std::to_string(r.cida_gap));
  return r;
}

// ---- alignment-direction comparison -------------------------------------

// Matching the first two moments of p(u|z) pins 2*|Z|*d_u scalars; matching
// those of p(z|u) pins 2*|U|*d_z. Counts returned as doubles since |Z| can
// be astronomically large.
inline std::pair<double, double> moment_constraint_counts(double n_z, double n_u,
                                                          double d_z, double d_u) {
  return {2.0 * n_z * d_u, 2.0 * n_u * d_z};
}

struct AlignmentDemo {
  DiscreteJoint joint;        // z embeddings {-2,-1,0,1,2}, u in {0,1}
  double z_mean_dev = 0.0;    // |E[z|u=0] - E[z|u=1]|
  double z_var_dev = 0.0;     // |V[z|u=0] - V[z|u=1]|
  double e_u_spread = 0.0;    // max_z E[u|z] - min_z E[u|z]
};

// A joint where the first two moments of p(z|u) are identical across u, yet
// E[u|z] still varies with z: matching p(z|u) moments is the weaker
// requirement.
inline AlignmentDemo alignment_strength_demo() {
  AlignmentDemo demo;
  DiscreteJoint& j = demo.joint;
  j.n_z = 5;
  j.z_embed = {-2.0, -1.0, 0.0, 1.0, 2.0};
  j.u_values = {0.0, 1.0};
  j.p.assign(10, 0.0);
  j.at(1, 0) = 0.25;    // z=-1 under u=0
  j.at(3, 0) = 0.25;    // z=+1 under u=0
  j.at(0, 1) = 0.0625;  // z=-2 under u=1
  j.at(2, 1) = 0.375;   // z= 0 under u=1
  j.at(4, 1) = 0.0625;  // z=+2 under u=1
  j.validate();

  // moments of z given u, via the transposed joint
  DiscreteJoint flipped;
  flipped.n_z = 2;
  flipped.u_values = j.z_embed;
  flipped.p.assign(10, 0.0);
  for (std::int64_t z = 0; z < 5; ++z)
    for (std::int64_t u = 0; u < 2; ++u) flipped.at(u, z) = j.at(z, u);
  const MomentTable zm = moments(flipped);
  demo.z_mean_dev = std::abs(zm.e_u_given_z[0] - zm.e_u_given_z[1]);
  demo.z_var_dev = std::abs(zm.v_u_given_z[0] - zm.v_u_given_z[1]);

  // E[u|z] varies across z (only z values with mass count)
  const MomentTable um = moments(j);
  double lo = 1e300, hi = -1e300;
  for (double v : um.e_u_given_z) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  demo.e_u_spread = hi - lo;

  if (demo.z_mean_dev > 1e-12 || demo.z_var_dev > 1e-12)
    throw OracleError("alignment demo: p(z|u) moments unexpectedly differ");
  if (demo.e_u_spread < 0.5)
    throw OracleError("alignment demo: E[u|z] unexpectedly near-constant");
  return demo;
}

// ---- random joint generators ---------------------------------------------

inline std::vector<double> random_u_values(Rng& rng, std::int64_t n) {
  std::vector<double> u(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    u[static_cast<std::size_t>(i)] = 0.3 * static_cast<double>(i) + rng.uniform(0.0, 0.2);
  return u;
}

// Dirichlet(1) mass over all cells: every conditional has full support.
inline DiscreteJoint random_joint(Rng& rng, std::int64_t max_z, std::int64_t max_u) {
  DiscreteJoint j;
  j.n_z = 2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_z - 1)));
  const std::int64_t nu =
      2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_u - 1)));
  j.u_values = random_u_values(rng, nu);
  j.p.resize(static_cast<std::size_t>(j.n_z * nu));
  double s = 0.0;
  for (auto& v : j.p) {
    v = -std::log(1.0 - rng.uniform());
    s += v;
  }
  for (auto& v : j.p) v /= s;
  return j;
}

// Product joint p(z) x p(u): z and u independent by construction.
inline DiscreteJoint random_product_joint(Rng& rng, std::int64_t max_z, std::int64_t max_u) {
  DiscreteJoint j;
  j.n_z = 2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_z - 1)));
  const std::int64_t nu =
      2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_u - 1)));
  j.u_values = random_u_values(rng, nu);
  std::vector<double> pz(static_cast<std::size_t>(j.n_z)), pu(static_cast<std::size_t>(nu));
  auto dirichlet = [&rng](std::vector<double>& v) {
    double s = 0.0;
    for (auto& e : v) {
      e = -std::log(1.0 - rng.uniform());
      s += e;
    }
    for (auto& e : v) e /= s;
  };
  dirichlet(pz);
  dirichlet(pu);
  j.p.resize(static_cast<std::size_t>(j.n_z * nu));
  for (std::int64_t z = 0; z < j.n_z; ++z)
    for (std::int64_t u = 0; u < nu; ++u)
      j.at(z, u) = pz[static_cast<std::size_t>(z)] * pu[static_cast<std::size_t>(u)];
  return j;
}

// Joint over (x,u,y) with u independent of the (x,y) pair — the family for
// which the posterior-table encoder aligns exactly.
inline DiscreteJoint random_labeled_product_joint(Rng& rng, std::int64_t max_x,
                                                  std::int64_t max_u, std::int64_t max_y) {
  DiscreteJoint j;
  j.n_z = 2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_x - 1)));
  const std::int64_t nu =
      2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_u - 1)));
  j.n_y = 2 + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(max_y - 1)));
  j.u_values = random_u_values(rng, nu);
  std::vector<double> pu(static_cast<std::size_t>(nu));
  std::vector<double> pxy(static_cast<std::size_t>(j.n_z * j.n_y));
  double s = 0.0;
  for (auto& e : pu) {
    e = -std::log(1.0 - rng.uniform());
    s += e;
  }
  for (auto& e : pu) e /= s;
  s = 0.0;
  for (auto& e : pxy) {
    e = -std::log(1.0 - rng.uniform());
    s += e;
  }
  for (auto& e : pxy) e /= s;
  j.p.resize(static_cast<std::size_t>(j.n_z * nu * j.n_y));
  for (std::int64_t x = 0; x < j.n_z; ++x)
    for (std::int64_t u = 0; u < nu; ++u)
      for (std::int64_t y = 0; y < j.n_y; ++y)
        j.at(x, u, y) = pu[static_cast<std::size_t>(u)] *
                        pxy[static_cast<std::size_t>(x * j.n_y + y)];
  return j;
}

}  // namespace cida::oracle
