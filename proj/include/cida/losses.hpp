#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cida/ops.hpp"

namespace cida {

// The two players' objectives: the encoder/predictor pair minimizes
// V_p - lambda_d * V_d while the discriminator minimizes V_d.
struct ValueTerms {
  double v_p = 0.0;
  double v_d = 0.0;
  double lambda_d = 0.0;

  double encoder_objective() const { return v_p - lambda_d * v_d; }
  double discriminator_objective() const { return v_d; }
};

inline ValueTerms value_terms(double v_p, double v_d, double lambda_d) {
  if (lambda_d < 0.0) throw Error("value_terms: lambda_d must be >= 0");
  return ValueTerms{v_p, v_d, lambda_d};
}

namespace losses {

// log for mixture weights: an exactly-zero weight contributes a -inf-like
// constant (its component vanishes from the log-sum-exp) with zero gradient.
inline Var log_weights(Var pi) {
  const Tensor& v = pi.val();
  for (std::int64_t i = 0; i < v.size(); ++i)
    if (v.at(i) < 0.0) throw NumericError("gmm_nll_loss: negative mixture weight");
  constexpr double floor_log = -745.0;
  return ops::detail::unary_ew(
      pi, "log_weights", [](double x) { return x > 0.0 ? std::log(x) : floor_log; },
      [](double x, double) { return x > 0.0 ? 1.0 / x : 0.0; });
}

inline std::int64_t batch_of(Var v, const char* op) {
  if (v.shape().empty() || v.shape()[0] < 1)
    throw ShapeError(std::string(op) + ": empty batch");
  return v.shape()[0];
}

// Mean cross-entropy of logits against integer labels, computed through the
// fused stable log-softmax.
inline Var prediction_loss(Tape& tape, Var logits, const std::vector<std::int64_t>& labels) {
  const std::int64_t b = batch_of(logits, "prediction_loss");
  if (logits.shape().size() != 2) throw ShapeError("prediction_loss: logits must be [B,C]");
  const std::int64_t c = logits.shape()[1];
  if (static_cast<std::int64_t>(labels.size()) != b)
    throw ShapeError("prediction_loss: label count mismatch");
  Tensor onehot(Shape{b, c});
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c)
      throw DataError("prediction_loss: label " + std::to_string(y) + " outside [0," +
                      std::to_string(c) + ")");
    onehot.at(i, y) = 1.0;
  }
  Var picked = ops::multiply(ops::log_softmax(logits), tape.input(std::move(onehot)));
  return ops::scale(ops::sum(picked), -1.0 / static_cast<double>(b));
}

// Mean squared Euclidean distance between predicted and true indices.
inline Var l2_domain_loss(Tape& tape, Var u_hat, Var u) {
  (void)tape;
  if (u_hat.shape() != u.shape())
    throw ShapeError("l2_domain_loss: shapes " + shape_str(u_hat.shape()) + " vs " +
                     shape_str(u.shape()));
  const std::int64_t b = batch_of(u_hat, "l2_domain_loss");
  return ops::scale(ops::sum(ops::square(ops::sub(u_hat, u))), 1.0 / static_cast<double>(b));
}

// Diagonal Gaussian negative log-likelihood without the 2*pi constant:
// mean over the batch, summed over index dimensions, of
// (mu-u)^2/(2 var) + log(var)/2.
inline Var gaussian_nll_loss(Tape& tape, Var mu, Var var, Var u) {
  (void)tape;
  if (mu.shape() != u.shape() || var.shape() != u.shape())
    throw ShapeError("gaussian_nll_loss: shape mismatch");
  const std::int64_t b = batch_of(mu, "gaussian_nll_loss");
  const Tensor& v = var.val();
  for (std::int64_t i = 0; i < v.size(); ++i)
    if (v.at(i) <= 0.0) throw NumericError("gaussian_nll_loss: non-positive variance");
  Var quad = ops::divide(ops::square(ops::sub(mu, u)), ops::scale(var, 2.0));
  Var reg = ops::scale(ops::log(var), 0.5);
  return ops::scale(ops::sum(ops::add(quad, reg)), 1.0 / static_cast<double>(b));
}

// Mixture NLL with fully normalized component densities, evaluated through
// log-sum-exp. pi is [B,K]; mu and var are [B,K,d_u]; u is [B,d_u].
inline Var gmm_nll_loss(Tape& tape, Var pi, Var mu, Var var, Var u) {
  (void)tape;
  if (pi.shape().size() != 2) throw ShapeError("gmm_nll_loss: pi must be [B,K]");
  const std::int64_t b = batch_of(pi, "gmm_nll_loss");
  const std::int64_t k = pi.shape()[1];
  if (u.shape().size() != 2 || u.shape()[0] != b)
    throw ShapeError("gmm_nll_loss: u must be [B,d_u]");
  const std::int64_t d = u.shape()[1];
  if (mu.shape() != Shape{b, k, d} || var.shape() != Shape{b, k, d})
    throw ShapeError("gmm_nll_loss: mu/var must be [B,K,d_u]");
  const Tensor& pv = pi.val();
  for (std::int64_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < k; ++j) s += pv.at(i, j);
    if (std::abs(s - 1.0) > 1e-5)
      throw NumericError("gmm_nll_loss: mixture weights do not sum to 1");
  }
  const Tensor& vv = var.val();
  for (std::int64_t i = 0; i < vv.size(); ++i)
    if (vv.at(i) <= 0.0) throw NumericError("gmm_nll_loss: non-positive variance");

  constexpr double half_log_2pi = 0.91893853320467274;  // log(2*pi)/2
  Var u3 = ops::tile_mid(u, k);
  Var quad = ops::divide(ops::square(ops::sub(mu, u3)), ops::scale(var, 2.0));
  Var log_density = ops::shift(
      ops::negate(ops::add(quad, ops::scale(ops::log(var), 0.5))), -half_log_2pi);
  Var comp = ops::sum_last(log_density);                    // [B,K]
  Var terms = ops::add(log_weights(pi), comp);              // [B,K]
  Var lse = ops::logsumexp(terms);                          // [B]
  return ops::scale(ops::sum(lse), -1.0 / static_cast<double>(b));
}

// Cross-entropy over discretized domain bins (categorical-DA baseline).
inline Var categorical_domain_loss(Tape& tape, Var bin_logits,
                                   const std::vector<std::int64_t>& bin_labels) {
  return prediction_loss(tape, bin_logits, bin_labels);
}

}  // namespace losses
}  // namespace cida
