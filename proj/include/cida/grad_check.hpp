#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cida/ops.hpp"

namespace cida {

// Central-difference gradient check. Returns the max over all coordinates of
//   |analytic - (f(x+h e_i) - f(x-h e_i)) / 2h| / max(1, |analytic|).
// Only meaningful at smooth points; at a kink (e.g. relu at 0) the reported
// error is O(1), which is how non-smooth probes show up to the caller.
inline double grad_check_multi(
    const std::function<Var(Tape&, std::vector<Var>&)>& fn,
    std::vector<Tensor> points, double step) {
  if (step <= 0.0) throw Error("grad_check: step must be positive");

  auto eval = [&](bool with_grad) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(points.size());
    for (Tensor& p : points) {
      p.set_requires_grad(with_grad);
      vars.push_back(tape.leaf(p));
    }
    Var y = fn(tape, vars);
    if (y.val().size() != 1) throw ShapeError("grad_check: function must return a scalar");
    double v = y.val().data[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value at probe point");
    if (with_grad) tape.backward(y);
    return v;
  };

  eval(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(points.size());
  for (Tensor& p : points) analytic.push_back(p.grad);

  double max_err = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    Tensor& p = points[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + step;
      const double fp = eval(false);
      p.data[i] = saved - step;
      const double fm = eval(false);
      p.data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

// Single-tensor form: function maps one tensor to a scalar.
inline double grad_check(const std::function<Var(Tape&, Var)>& fn, Tensor point,
                         double step) {
  return grad_check_multi(
      [&fn](Tape& tape, std::vector<Var>& xs) { return fn(tape, xs[0]); },
      {std::move(point)}, step);
}

}  // namespace cida
