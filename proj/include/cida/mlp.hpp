#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cida/ops.hpp"
#include "cida/rng.hpp"

namespace cida {

enum class Activation { Relu, Tanh };

inline std::string activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

// Fully connected network. Weights are stored {in,out} row-major so the
// forward pass is x @ W + b; hidden layers use the configured activation and
// the final layer is linear.
struct Mlp {
  std::vector<std::int64_t> sizes;
  Activation act = Activation::Relu;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  // Glorot-uniform weights, zero biases, deterministic in seed.
  static Mlp init(std::vector<std::int64_t> layer_sizes, Activation act,
                  std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ShapeError("mlp: need at least 2 layer sizes");
    for (auto s : layer_sizes)
      if (s < 1) throw ShapeError("mlp: non-positive layer size");
    Mlp m;
    m.sizes = std::move(layer_sizes);
    m.act = act;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
      const std::int64_t fan_in = m.sizes[l], fan_out = m.sizes[l + 1];
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Tensor w(Shape{fan_in, fan_out});
      for (auto& v : w.data) v = rng.uniform(-a, a);
      w.set_requires_grad(true);
      Tensor b(Shape{fan_out});
      b.set_requires_grad(true);
      m.weights.push_back(std::move(w));
      m.biases.push_back(std::move(b));
    }
    return m;
  }

  // frozen = bind parameters as constants (no gradients recorded for them).
  Var forward(Tape& tape, Var x, bool frozen = false) {
    if (x.shape().size() != 2 || x.shape()[1] != sizes.front())
      throw ShapeError("mlp: input shape " + shape_str(x.shape()) + ", expected [B," +
                       std::to_string(sizes.front()) + "]");
    Var h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Var w = frozen ? tape.input(weights[l]) : tape.leaf(weights[l]);
      Var b = frozen ? tape.input(biases[l]) : tape.leaf(biases[l]);
      h = ops::add(ops::matmul(h, w), b);
      if (l + 1 < weights.size())
        h = act == Activation::Relu ? ops::relu(h) : ops::tanh(h);
    }
    return h;
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
  }

  // Flat layout: per layer, weights row-major then biases.
  void append_flat(std::vector<double>& out) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.insert(out.end(), weights[l].data.begin(), weights[l].data.end());
      out.insert(out.end(), biases[l].data.begin(), biases[l].data.end());
    }
  }

  void load_flat(const std::vector<double>& flat, std::size_t& cursor) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (auto& v : weights[l].data) v = flat.at(cursor++);
      for (auto& v : biases[l].data) v = flat.at(cursor++);
    }
  }
};

}  // namespace cida
