#pragma once

#include <cstdint>
#include <vector>

#include "cida/mlp.hpp"

namespace cida {

constexpr double kVarFloor = 1e-4;

// Encoder z = E(x, u_norm): an MLP over the concatenated input and
// normalized domain index. u_norm entries follow the dataset normalization
// contract ([0,1] over the index range seen at training time).
struct EncoderE {
  Mlp net;
  std::int64_t d_x = 0, d_u = 0, d_z = 0;

  static EncoderE make(std::int64_t d_x, std::int64_t d_u, std::int64_t d_z,
                       std::vector<std::int64_t> hidden, Activation act,
                       std::uint64_t seed) {
    std::vector<std::int64_t> sizes{d_x + d_u};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(d_z);
    return EncoderE{Mlp::init(std::move(sizes), act, seed), d_x, d_u, d_z};
  }

  Var encode(Tape& tape, Var x, Var u_norm, bool frozen = false) {
    if (x.shape().size() != 2 || x.shape()[1] != d_x)
      throw ShapeError("encode: x shape " + shape_str(x.shape()));
    if (u_norm.shape().size() != 2 || u_norm.shape()[1] != d_u ||
        u_norm.shape()[0] != x.shape()[0])
      throw ShapeError("encode: u shape " + shape_str(u_norm.shape()));
    return net.forward(tape, ops::concat_cols(x, u_norm), frozen);
  }
};

// Predictor F: encoding -> class logits.
struct PredictorF {
  Mlp net;
  std::int64_t n_classes = 0;

  static PredictorF make(std::int64_t d_z, std::int64_t n_classes,
                         std::vector<std::int64_t> hidden, Activation act,
                         std::uint64_t seed) {
    if (n_classes < 2) throw ShapeError("predictor: need at least 2 classes");
    std::vector<std::int64_t> sizes{d_z};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(n_classes);
    return PredictorF{Mlp::init(std::move(sizes), act, seed), n_classes};
  }

  Var logits(Tape& tape, Var z, bool frozen = false) { return net.forward(tape, z, frozen); }
};

// Class decision from logits; ties break toward the lowest class index.
inline std::vector<std::int64_t> argmax_rows(const Tensor& logits) {
  if (logits.shape.size() != 2) throw ShapeError("argmax: need [B,C]");
  const std::int64_t b = logits.shape[0], c = logits.shape[1];
  std::vector<std::int64_t> out(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < c; ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

enum class DiscKind { Point, Gaussian, Gmm, Categorical };

inline std::string disc_kind_name(DiscKind k) {
  switch (k) {
    case DiscKind::Point: return "point";
    case DiscKind::Gaussian: return "gaussian";
    case DiscKind::Gmm: return "gmm";
    case DiscKind::Categorical: return "categorical";
  }
  return "?";
}

// Per-kind outputs of the discriminator head; only the members for the
// active kind are valid.
struct DiscOutput {
  Var point;       // Point: predicted index, [B,d_u]
  Var mu;          // Gaussian: [B,d_u]; Gmm: [B,K,d_u]
  Var var;         // same shapes as mu, >= var_floor
  Var pi;          // Gmm mixture weights, [B,K]
  Var bin_logits;  // Categorical: [B,bins]
};

// Discriminator D over encodings. The head width is determined by the kind:
// point d_u, gaussian 2*d_u, gmm K*(1+2*d_u), categorical bins. Variances go
// through softplus plus a positive floor so the NLL losses stay defined
// while the encoder pushes against them.
struct DiscriminatorD {
  DiscKind kind = DiscKind::Point;
  Mlp net;
  std::int64_t d_u = 0;
  std::int64_t gmm_k = 1;
  std::int64_t bins = 0;
  double var_floor = kVarFloor;

  static std::int64_t head_width(DiscKind kind, std::int64_t d_u, std::int64_t k,
                                 std::int64_t bins) {
    switch (kind) {
      case DiscKind::Point: return d_u;
      case DiscKind::Gaussian: return 2 * d_u;
      case DiscKind::Gmm: return k * (1 + 2 * d_u);
      case DiscKind::Categorical: return bins;
    }
    return 0;
  }

  static DiscriminatorD make(DiscKind kind, std::int64_t d_z, std::int64_t d_u,
                             std::vector<std::int64_t> hidden, Activation act,
                             std::uint64_t seed, std::int64_t gmm_k = 1,
                             std::int64_t bins = 0, double var_floor = kVarFloor) {
    if (kind == DiscKind::Gmm && gmm_k < 1) throw ShapeError("discriminator: gmm needs K >= 1");
    if (kind == DiscKind::Categorical && bins < 1)
      throw ShapeError("discriminator: categorical needs bins >= 1");
    if (var_floor <= 0.0) throw Error("discriminator: var floor must be positive");
    std::vector<std::int64_t> sizes{d_z};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(head_width(kind, d_u, gmm_k, bins));
    return DiscriminatorD{kind, Mlp::init(std::move(sizes), act, seed),
                          d_u, gmm_k, bins, var_floor};
  }

  DiscOutput forward(Tape& tape, Var z, bool frozen = false) {
    return forward_impl(tape, z, frozen);
  }

  DiscOutput forward_impl(Tape& tape, Var z, bool frozen) {
    Var raw = net.forward(tape, z, frozen);
    const std::int64_t b = raw.shape()[0];
    DiscOutput out;
    switch (kind) {
      case DiscKind::Point:
        out.point = raw;
        break;
      case DiscKind::Gaussian:
        out.mu = ops::slice_cols(raw, 0, d_u);
        out.var = ops::shift(ops::softplus(ops::slice_cols(raw, d_u, d_u)), var_floor);
        break;
      case DiscKind::Gmm: {
        out.pi = ops::softmax(ops::slice_cols(raw, 0, gmm_k));
        out.mu = ops::reshape(ops::slice_cols(raw, gmm_k, gmm_k * d_u), Shape{b, gmm_k, d_u});
        out.var = ops::shift(
            ops::softplus(ops::reshape(ops::slice_cols(raw, gmm_k + gmm_k * d_u, gmm_k * d_u),
                                       Shape{b, gmm_k, d_u})),
            var_floor);
        break;
      }
      case DiscKind::Categorical:
        out.bin_logits = raw;
        break;
    }
    return out;
  }
};

}  // namespace cida
