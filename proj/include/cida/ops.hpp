#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cida/tape.hpp"

// Differentiable primitives over tape Vars. Each op validates shapes, checks
// the result for non-finite values (failing fast with the op name), and
// records a backward rule only when an input requires gradients.

namespace cida::ops {

namespace detail {

inline void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
}

template <class F, class D>
Var unary_ew(Var a, const char* name, F f, D dfdx) {
  const Tensor& x = a.val();
  Tensor out(x.shape);
  for (std::int64_t i = 0; i < x.size(); ++i) out.at(i) = f(x.at(i));
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, dfdx](Tape& t, const Tape::Node& self) {
      const Tensor& x = t.val(aid);
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < x.size(); ++i)
        da[static_cast<std::size_t>(i)] +=
            dfdx(x.at(i), self.value.at(i)) * self.adj[static_cast<std::size_t>(i)];
    };
  return a.tape->make(std::move(out), ng, name, std::move(back));
}

enum class BinMode { Same, ScalarLeft, ScalarRight, RowRight };

inline BinMode bin_mode(const Tensor& a, const Tensor& b, const char* op,
                        bool allow_row_bcast) {
  if (a.shape == b.shape) return BinMode::Same;
  if (b.size() == 1) return BinMode::ScalarRight;
  if (a.size() == 1) return BinMode::ScalarLeft;
  if (allow_row_bcast && a.shape.size() == 2 &&
      (b.shape == Shape{a.shape[1]} || b.shape == Shape{1, a.shape[1]}))
    return BinMode::RowRight;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                   shape_str(b.shape) + " do not conform");
}

}  // namespace detail

// ---- binary elementwise -----------------------------------------------------

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b, "add");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  auto mode = detail::bin_mode(A, B, "add", /*allow_row_bcast=*/true);
  Tensor out(mode == detail::BinMode::ScalarLeft ? B.shape : A.shape);
  switch (mode) {
    case detail::BinMode::Same:
      for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) + B.at(i);
      break;
    case detail::BinMode::ScalarRight:
      for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) + B.at(0);
      break;
    case detail::BinMode::ScalarLeft:
      for (std::int64_t i = 0; i < B.size(); ++i) out.at(i) = A.at(0) + B.at(i);
      break;
    case detail::BinMode::RowRight: {
      std::int64_t m = A.shape[0], n = A.shape[1];
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = A.at(i, j) + B.at(j);
      break;
    }
  }
  bool ng = a.needs_grad() || b.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, bid = b.id, mode](Tape& t, const Tape::Node& self) {
      const auto& g = self.adj;
      std::int64_t n_out = self.value.size();
      if (t.node(aid).needs_grad) {
        auto& da = t.adj(aid);
        if (mode == detail::BinMode::ScalarLeft)
          for (std::int64_t i = 0; i < n_out; ++i) da[0] += g[static_cast<std::size_t>(i)];
        else
          for (std::int64_t i = 0; i < n_out; ++i)
            da[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
      }
      if (t.node(bid).needs_grad) {
        auto& db = t.adj(bid);
        switch (mode) {
          case detail::BinMode::Same:
            for (std::int64_t i = 0; i < n_out; ++i)
              db[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
            break;
          case detail::BinMode::ScalarRight:
            for (std::int64_t i = 0; i < n_out; ++i) db[0] += g[static_cast<std::size_t>(i)];
            break;
          case detail::BinMode::ScalarLeft:
            for (std::int64_t i = 0; i < n_out; ++i)
              db[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
            break;
          case detail::BinMode::RowRight: {
            std::int64_t m = self.value.shape[0], n = self.value.shape[1];
            for (std::int64_t i = 0; i < m; ++i)
              for (std::int64_t j = 0; j < n; ++j)
                db[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i * n + j)];
            break;
          }
        }
      }
    };
  return a.tape->make(std::move(out), ng, "add", std::move(back));
}

inline Var negate(Var a) {
  return detail::unary_ew(a, "negate", [](double x) { return -x; },
                          [](double, double) { return -1.0; });
}

inline Var sub(Var a, Var b) { return add(a, negate(b)); }

inline Var multiply(Var a, Var b) {
  detail::require_same_tape(a, b, "multiply");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  auto mode = detail::bin_mode(A, B, "multiply", /*allow_row_bcast=*/false);
  Tensor out(mode == detail::BinMode::ScalarLeft ? B.shape : A.shape);
  if (mode == detail::BinMode::Same)
    for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) * B.at(i);
  else if (mode == detail::BinMode::ScalarRight)
    for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) * B.at(0);
  else
    for (std::int64_t i = 0; i < B.size(); ++i) out.at(i) = A.at(0) * B.at(i);
  bool ng = a.needs_grad() || b.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, bid = b.id, mode](Tape& t, const Tape::Node& self) {
      const auto& g = self.adj;
      const Tensor& A = t.val(aid);
      const Tensor& B = t.val(bid);
      std::int64_t n_out = self.value.size();
      if (t.node(aid).needs_grad) {
        auto& da = t.adj(aid);
        for (std::int64_t i = 0; i < n_out; ++i) {
          double bv = mode == detail::BinMode::ScalarRight ? B.at(0) : B.at(i);
          if (mode == detail::BinMode::ScalarLeft)
            da[0] += g[static_cast<std::size_t>(i)] * B.at(i);
          else
            da[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * bv;
        }
      }
      if (t.node(bid).needs_grad) {
        auto& db = t.adj(bid);
        for (std::int64_t i = 0; i < n_out; ++i) {
          double av = mode == detail::BinMode::ScalarLeft ? A.at(0) : A.at(i);
          if (mode == detail::BinMode::ScalarRight)
            db[0] += g[static_cast<std::size_t>(i)] * A.at(i);
          else
            db[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * av;
        }
      }
    };
  return a.tape->make(std::move(out), ng, "multiply", std::move(back));
}

inline Var divide(Var a, Var b) {
  detail::require_same_tape(a, b, "divide");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  auto mode = detail::bin_mode(A, B, "divide", /*allow_row_bcast=*/false);
  if (mode == detail::BinMode::ScalarLeft)
    throw ShapeError("divide: scalar numerator against tensor denominator is not supported");
  for (std::int64_t i = 0; i < B.size(); ++i)
    if (B.at(i) == 0.0) throw NumericError("divide: zero operand");
  Tensor out(A.shape);
  if (mode == detail::BinMode::Same)
    for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) / B.at(i);
  else
    for (std::int64_t i = 0; i < A.size(); ++i) out.at(i) = A.at(i) / B.at(0);
  bool ng = a.needs_grad() || b.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, bid = b.id, mode](Tape& t, const Tape::Node& self) {
      const auto& g = self.adj;
      const Tensor& A = t.val(aid);
      const Tensor& B = t.val(bid);
      std::int64_t n_out = self.value.size();
      for (std::int64_t i = 0; i < n_out; ++i) {
        double bv = mode == detail::BinMode::ScalarRight ? B.at(0) : B.at(i);
        double gi = g[static_cast<std::size_t>(i)];
        if (t.node(aid).needs_grad) t.adj(aid)[static_cast<std::size_t>(i)] += gi / bv;
        if (t.node(bid).needs_grad) {
          std::size_t bi = mode == detail::BinMode::ScalarRight ? 0 : static_cast<std::size_t>(i);
          t.adj(bid)[bi] += -gi * A.at(i) / (bv * bv);
        }
      }
    };
  return a.tape->make(std::move(out), ng, "divide", std::move(back));
}

// ---- unary elementwise ------------------------------------------------------

inline Var exp(Var a) {
  return detail::unary_ew(a, "exp", [](double x) { return std::exp(x); },
                          [](double, double y) { return y; });
}

inline Var log(Var a) {
  const Tensor& x = a.val();
  for (std::int64_t i = 0; i < x.size(); ++i)
    if (x.at(i) <= 0.0) throw NumericError("log: non-positive operand");
  return detail::unary_ew(a, "log", [](double v) { return std::log(v); },
                          [](double v, double) { return 1.0 / v; });
}

inline Var tanh(Var a) {
  return detail::unary_ew(a, "tanh", [](double x) { return std::tanh(x); },
                          [](double, double y) { return 1.0 - y * y; });
}

// Subgradient at 0 is taken as 0.
inline Var relu(Var a) {
  return detail::unary_ew(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                          [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline double softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline Var softplus(Var a) {
  return detail::unary_ew(a, "softplus", softplus_value,
                          [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline Var square(Var a) {
  return detail::unary_ew(a, "square", [](double x) { return x * x; },
                          [](double x, double) { return 2.0 * x; });
}

// Multiply / shift by a plain constant (not a tape value).
inline Var scale(Var a, double c) {
  return detail::unary_ew(a, "scale", [c](double x) { return c * x; },
                          [c](double, double) { return c; });
}

inline Var shift(Var a, double c) {
  return detail::unary_ew(a, "shift", [c](double x) { return x + c; },
                          [](double, double) { return 1.0; });
}

// Gradient reversal: identity forward, upstream gradient scaled by -lambda.
inline Tensor grl_backward_scale(const Tensor& upstream, double lambda) {
  if (lambda < 0.0) throw Error("grl: lambda must be >= 0");
  Tensor out(upstream.shape);
  for (std::int64_t i = 0; i < upstream.size(); ++i) out.at(i) = -lambda * upstream.at(i);
  return out;
}

inline Var grl(Var a, double lambda) {
  if (lambda < 0.0) throw Error("grl: lambda must be >= 0");
  return detail::unary_ew(a, "grl", [](double x) { return x; },
                          [lambda](double, double) { return -lambda; });
}

// ---- matmul -----------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b, "matmul");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw ShapeError("matmul: shapes " + shape_str(A.shape) + " x " + shape_str(B.shape));
  const std::int64_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
  Tensor out(Shape{m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    double* orow = out.data.data() + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = A.data[static_cast<std::size_t>(i * k + p)];
      const double* brow = B.data.data() + p * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  bool ng = a.needs_grad() || b.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, bid = b.id, m, k, n](Tape& t, const Tape::Node& self) {
      const auto& g = self.adj;
      const Tensor& A = t.val(aid);
      const Tensor& B = t.val(bid);
      if (t.node(aid).needs_grad) {
        auto& da = t.adj(aid);
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = g.data() + i * n;
            const double* brow = B.data.data() + p * n;
            for (std::int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            da[static_cast<std::size_t>(i * k + p)] += acc;
          }
      }
      if (t.node(bid).needs_grad) {
        auto& db = t.adj(bid);
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t p = 0; p < k; ++p) {
            const double av = A.data[static_cast<std::size_t>(i * k + p)];
            double* dbrow = db.data() + p * n;
            const double* grow = g.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
          }
      }
    };
  return a.tape->make(std::move(out), ng, "matmul", std::move(back));
}

// ---- reductions -------------------------------------------------------------

inline Var sum(Var a) {
  const Tensor& A = a.val();
  double s = 0.0;
  for (std::int64_t i = 0; i < A.size(); ++i) s += A.at(i);
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      double g = self.adj[0];
      for (auto& v : da) v += g;
    };
  return a.tape->make(Tensor::scalar(s), ng, "sum", std::move(back));
}

inline Var mean(Var a) {
  const Tensor& A = a.val();
  if (A.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (std::int64_t i = 0; i < A.size(); ++i) s += A.at(i);
  const double inv = 1.0 / static_cast<double>(A.size());
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, inv](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      double g = self.adj[0] * inv;
      for (auto& v : da) v += g;
    };
  return a.tape->make(Tensor::scalar(s * inv), ng, "mean", std::move(back));
}

// Sums the trailing axis: {..., n} -> {...}.
inline Var sum_last(Var a) {
  const Tensor& A = a.val();
  if (A.shape.empty()) throw ShapeError("sum_last: scalar input");
  const std::int64_t n = A.shape.back();
  const std::int64_t rows = n == 0 ? 0 : A.size() / n;
  Shape out_shape(A.shape.begin(), A.shape.end() - 1);
  Tensor out(out_shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += A.at(r * n + j);
    out.at(r) = s;
  }
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, n, rows](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::int64_t r = 0; r < rows; ++r) {
        double g = self.adj[static_cast<std::size_t>(r)];
        for (std::int64_t j = 0; j < n; ++j) da[static_cast<std::size_t>(r * n + j)] += g;
      }
    };
  return a.tape->make(std::move(out), ng, "sum_last", std::move(back));
}

// ---- structure --------------------------------------------------------------

inline Var concat_cols(Var a, Var b) {
  detail::require_same_tape(a, b, "concat-last-axis");
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[0] != B.shape[0])
    throw ShapeError("concat-last-axis: shapes " + shape_str(A.shape) + " and " +
                     shape_str(B.shape));
  const std::int64_t m = A.shape[0], na = A.shape[1], nb = B.shape[1];
  Tensor out(Shape{m, na + nb});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < na; ++j) out.at(i, j) = A.at(i, j);
    for (std::int64_t j = 0; j < nb; ++j) out.at(i, na + j) = B.at(i, j);
  }
  bool ng = a.needs_grad() || b.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, bid = b.id, m, na, nb](Tape& t, const Tape::Node& self) {
      const auto& g = self.adj;
      const std::int64_t n = na + nb;
      if (t.node(aid).needs_grad) {
        auto& da = t.adj(aid);
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t j = 0; j < na; ++j)
            da[static_cast<std::size_t>(i * na + j)] += g[static_cast<std::size_t>(i * n + j)];
      }
      if (t.node(bid).needs_grad) {
        auto& db = t.adj(bid);
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t j = 0; j < nb; ++j)
            db[static_cast<std::size_t>(i * nb + j)] +=
                g[static_cast<std::size_t>(i * n + na + j)];
      }
    };
  return a.tape->make(std::move(out), ng, "concat-last-axis", std::move(back));
}

inline Var slice_cols(Var a, std::int64_t start, std::int64_t len) {
  const Tensor& A = a.val();
  if (A.shape.size() != 2 || start < 0 || len < 1 || start + len > A.shape[1])
    throw ShapeError("slice_cols: bad range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") for shape " + shape_str(A.shape));
  const std::int64_t m = A.shape[0], n = A.shape[1];
  Tensor out(Shape{m, len});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < len; ++j) out.at(i, j) = A.at(i, start + j);
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, m, n, start, len](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < len; ++j)
          da[static_cast<std::size_t>(i * n + start + j)] +=
              self.adj[static_cast<std::size_t>(i * len + j)];
    };
  return a.tape->make(std::move(out), ng, "slice_cols", std::move(back));
}

inline Var select_rows(Var a, const std::vector<std::int64_t>& idx) {
  const Tensor& A = a.val();
  if (A.shape.empty()) throw ShapeError("select-rows: scalar input");
  const std::int64_t rows = A.shape[0];
  const std::int64_t rowsz = rows == 0 ? 0 : A.size() / rows;
  for (auto i : idx)
    if (i < 0 || i >= rows)
      throw ShapeError("select-rows: index " + std::to_string(i) + " out of " +
                       std::to_string(rows));
  Shape out_shape = A.shape;
  out_shape[0] = static_cast<std::int64_t>(idx.size());
  Tensor out(out_shape);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::int64_t j = 0; j < rowsz; ++j)
      out.at(static_cast<std::int64_t>(r) * rowsz + j) = A.at(idx[r] * rowsz + j);
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, idx, rowsz](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::int64_t j = 0; j < rowsz; ++j)
          da[static_cast<std::size_t>(idx[r] * rowsz + j)] +=
              self.adj[r * static_cast<std::size_t>(rowsz) + static_cast<std::size_t>(j)];
    };
  return a.tape->make(std::move(out), ng, "select-rows", std::move(back));
}

inline Var reshape(Var a, Shape new_shape) {
  const Tensor& A = a.val();
  if (shape_size(new_shape) != A.size())
    throw ShapeError("reshape: " + shape_str(A.shape) + " to " + shape_str(new_shape));
  Tensor out = A;
  out.shape = std::move(new_shape);
  out.requires_grad = false;
  out.grad.clear();
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += self.adj[i];
    };
  return a.tape->make(std::move(out), ng, "reshape", std::move(back));
}

// Repeats each row K times along a new middle axis: {B,d} -> {B,K,d}.
inline Var tile_mid(Var a, std::int64_t k) {
  const Tensor& A = a.val();
  if (A.shape.size() != 2 || k < 1)
    throw ShapeError("tile_mid: need 2-d input and k >= 1");
  const std::int64_t b = A.shape[0], d = A.shape[1];
  Tensor out(Shape{b, k, d});
  for (std::int64_t i = 0; i < b; ++i)
    for (std::int64_t c = 0; c < k; ++c)
      for (std::int64_t j = 0; j < d; ++j) out.at((i * k + c) * d + j) = A.at(i, j);
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, b, k, d](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t c = 0; c < k; ++c)
          for (std::int64_t j = 0; j < d; ++j)
            da[static_cast<std::size_t>(i * d + j)] +=
                self.adj[static_cast<std::size_t>((i * k + c) * d + j)];
    };
  return a.tape->make(std::move(out), ng, "tile_mid", std::move(back));
}

// ---- stable softmax family --------------------------------------------------

namespace detail {
inline void require_matrix(const Tensor& t, const char* op) {
  if (t.shape.size() != 2 || t.shape[1] < 1)
    throw ShapeError(std::string(op) + ": need shape [B,C], got " + shape_str(t.shape));
}
}  // namespace detail

// Row-wise log-softmax via the max-shifted log-sum-exp, safe for large logits.
inline Var log_softmax(Var a) {
  const Tensor& A = a.val();
  detail::require_matrix(A, "softmax-logsumexp");
  const std::int64_t m = A.shape[0], n = A.shape[1];
  Tensor out(A.shape);
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = A.at(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += std::exp(A.at(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) = A.at(i, j) - lse;
  }
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, m, n](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < m; ++i) {
        double gsum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) gsum += self.adj[static_cast<std::size_t>(i * n + j)];
        for (std::int64_t j = 0; j < n; ++j)
          da[static_cast<std::size_t>(i * n + j)] +=
              self.adj[static_cast<std::size_t>(i * n + j)] -
              std::exp(self.value.at(i, j)) * gsum;
      }
    };
  return a.tape->make(std::move(out), ng, "softmax-logsumexp", std::move(back));
}

inline Var softmax(Var a) {
  const Tensor& A = a.val();
  detail::require_matrix(A, "softmax");
  const std::int64_t m = A.shape[0], n = A.shape[1];
  Tensor out(A.shape);
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = A.at(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      out.at(i, j) = std::exp(A.at(i, j) - mx);
      s += out.at(i, j);
    }
    for (std::int64_t j = 0; j < n; ++j) out.at(i, j) /= s;
  }
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, m, n](Tape& t, const Tape::Node& self) {
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::int64_t j = 0; j < n; ++j)
          dot += self.adj[static_cast<std::size_t>(i * n + j)] * self.value.at(i, j);
        for (std::int64_t j = 0; j < n; ++j)
          da[static_cast<std::size_t>(i * n + j)] +=
              self.value.at(i, j) * (self.adj[static_cast<std::size_t>(i * n + j)] - dot);
      }
    };
  return a.tape->make(std::move(out), ng, "softmax", std::move(back));
}

// Row-wise log-sum-exp: {B,C} -> {B}.
inline Var logsumexp(Var a) {
  const Tensor& A = a.val();
  detail::require_matrix(A, "logsumexp");
  const std::int64_t m = A.shape[0], n = A.shape[1];
  Tensor out(Shape{m});
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = A.at(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += std::exp(A.at(i, j) - mx);
    out.at(i) = mx + std::log(s);
  }
  bool ng = a.needs_grad();
  Tape::BackFn back;
  if (ng)
    back = [aid = a.id, m, n](Tape& t, const Tape::Node& self) {
      const Tensor& A = t.val(aid);
      auto& da = t.adj(aid);
      for (std::int64_t i = 0; i < m; ++i) {
        double g = self.adj[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < n; ++j)
          da[static_cast<std::size_t>(i * n + j)] +=
              std::exp(A.at(i, j) - self.value.at(i)) * g;
      }
    };
  return a.tape->make(std::move(out), ng, "logsumexp", std::move(back));
}

// ---- name dispatch ----------------------------------------------------------

// String-keyed entry point over the primitive set. select-rows takes its
// indices as a second tensor of integral values.
inline Var forward(Tape& tape, std::string_view op_name, std::vector<Var> inputs) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n)
      throw Error(std::string(op_name) + ": expected " + std::to_string(n) + " inputs, got " +
                  std::to_string(inputs.size()));
  };
  (void)tape;
  if (op_name == "matmul") { arity(2); return matmul(inputs[0], inputs[1]); }
  if (op_name == "add") { arity(2); return add(inputs[0], inputs[1]); }
  if (op_name == "multiply") { arity(2); return multiply(inputs[0], inputs[1]); }
  if (op_name == "divide") { arity(2); return divide(inputs[0], inputs[1]); }
  if (op_name == "negate") { arity(1); return negate(inputs[0]); }
  if (op_name == "exp") { arity(1); return exp(inputs[0]); }
  if (op_name == "log") { arity(1); return log(inputs[0]); }
  if (op_name == "tanh") { arity(1); return tanh(inputs[0]); }
  if (op_name == "relu") { arity(1); return relu(inputs[0]); }
  if (op_name == "softplus") { arity(1); return softplus(inputs[0]); }
  if (op_name == "square") { arity(1); return square(inputs[0]); }
  if (op_name == "sum") { arity(1); return sum(inputs[0]); }
  if (op_name == "mean") { arity(1); return mean(inputs[0]); }
  if (op_name == "concat-last-axis") { arity(2); return concat_cols(inputs[0], inputs[1]); }
  if (op_name == "softmax-logsumexp") { arity(1); return log_softmax(inputs[0]); }
  if (op_name == "softmax") { arity(1); return softmax(inputs[0]); }
  if (op_name == "logsumexp") { arity(1); return logsumexp(inputs[0]); }
  if (op_name == "select-rows") {
    arity(2);
    const Tensor& ix = inputs[1].val();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(ix.size()));
    for (std::int64_t i = 0; i < ix.size(); ++i) {
      double v = ix.at(i);
      if (v != std::floor(v)) throw Error("select-rows: non-integral index");
      idx[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
    }
    return select_rows(inputs[0], idx);
  }
  throw Error("unknown op: " + std::string(op_name));
}

}  // namespace cida::ops

namespace cida {
inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::multiply(a, b); }
inline Var operator-(Var a) { return ops::negate(a); }
}  // namespace cida
