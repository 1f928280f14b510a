#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "cida/error.hpp"

namespace cida {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_size(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor of 64-bit reals. `grad` is kept the same size as
// `data` whenever requires_grad is set. Extent 0 is allowed (empty batches);
// all stored values must be finite.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;

  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(check_extents(shape), fill) {}

  static Tensor scalar(double v) {
    Tensor t{Shape{}};
    t.data[0] = v;
    return t;
  }

  static Tensor from(Shape s, std::vector<double> values) {
    Tensor t;
    t.shape = std::move(s);
    if (shape_size(t.shape) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(t.shape));
    check_extents(t.shape);
    t.data = std::move(values);
    return t;
  }

  static Tensor row(std::vector<double> values) {
    Shape s{1, static_cast<std::int64_t>(values.size())};
    return from(std::move(s), std::move(values));
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t rows() const { return shape.empty() ? 1 : shape.front(); }
  std::int64_t cols() const { return shape.empty() ? 1 : size() / std::max<std::int64_t>(shape.front(), 1); }

  double& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
  double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }

  void set_requires_grad(bool on) {
    requires_grad = on;
    if (on)
      grad.assign(data.size(), 0.0);
    else
      grad.clear();
  }

  void zero_grad() {
    if (requires_grad) grad.assign(data.size(), 0.0);
  }

  void check_finite(const char* ctx) const {
    for (double v : data)
      if (!std::isfinite(v))
        throw NumericError(std::string("non-finite value in ") + ctx);
  }

 private:
  static std::size_t check_extents(const Shape& s) {
    for (auto e : s)
      if (e < 0) throw ShapeError("tensor: negative extent in " + shape_str(s));
    return static_cast<std::size_t>(shape_size(s));
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace cida
