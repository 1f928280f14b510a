#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cida/checkpoint.hpp"
#include "cida/dataset.hpp"
#include "cida/util.hpp"

namespace cida {

struct DomainAccuracyRow {
  std::vector<double> u;
  Split split = Split::Source;
  std::int64_t n = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;
};

struct DomainAccuracyTable {
  std::vector<DomainAccuracyRow> rows;  // sorted by u, lexicographically
  std::int64_t source_n = 0, target_n = 0;
  double source_accuracy = 0.0, target_accuracy = 0.0;
};

namespace detail {
// Frozen encode -> predict on a block of samples; returns argmax classes.
inline std::vector<std::int64_t> predict_batch(ModelBundle& m, const IndexNormalization& norm,
                                               const Dataset& ds,
                                               const std::vector<std::size_t>& idx) {
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
  Tensor x(Shape{n, ds.d_x}), u(Shape{n, static_cast<std::int64_t>(norm.dims())});
  for (std::int64_t i = 0; i < n; ++i) {
    const Sample& s = ds.samples[idx[static_cast<std::size_t>(i)]];
    for (std::int64_t j = 0; j < ds.d_x; ++j) x.at(i, j) = s.x[static_cast<std::size_t>(j)];
    auto un = norm.apply(s.u);
    for (std::size_t j = 0; j < un.size(); ++j) u.at(i, static_cast<std::int64_t>(j)) = un[j];
  }
  Tape tape;
  Var z = m.encoder.encode(tape, tape.input(std::move(x)), tape.input(std::move(u)),
                           /*frozen=*/true);
  Var logits = m.predictor.logits(tape, z, /*frozen=*/true);
  return argmax_rows(logits.val());
}

// Frozen encodings for a block of samples, written into rows of `z_out`.
inline void encode_batch(ModelBundle& m, const IndexNormalization& norm, const Dataset& ds,
                         const std::vector<std::size_t>& idx, std::size_t row0,
                         std::vector<double>& z_out, std::int64_t d_z) {
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
  Tensor x(Shape{n, ds.d_x}), u(Shape{n, static_cast<std::int64_t>(norm.dims())});
  for (std::int64_t i = 0; i < n; ++i) {
    const Sample& s = ds.samples[idx[static_cast<std::size_t>(i)]];
    for (std::int64_t j = 0; j < ds.d_x; ++j) x.at(i, j) = s.x[static_cast<std::size_t>(j)];
    auto un = norm.apply(s.u);
    for (std::size_t j = 0; j < un.size(); ++j) u.at(i, static_cast<std::int64_t>(j)) = un[j];
  }
  Tape tape;
  Var z = m.encoder.encode(tape, tape.input(std::move(x)), tape.input(std::move(u)), true);
  const Tensor& zv = z.val();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d_z; ++j)
      z_out[(row0 + static_cast<std::size_t>(i)) * static_cast<std::size_t>(d_z) +
            static_cast<std::size_t>(j)] = zv.at(i, j);
}
}  // namespace detail

// Per-domain accuracy of a frozen checkpoint, grouped by exact index value;
// evaluation uses the checkpoint's stored normalization. Aggregates are
// sample-weighted means over each split.
inline DomainAccuracyTable evaluate(const Checkpoint& ckpt, const Dataset& ds) {
  if (ds.d_x != ckpt.d_x() || ds.d_u != ckpt.d_u())
    throw ShapeError("evaluate: dataset dims do not match checkpoint");
  ModelBundle m = build_models(ckpt);

  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) groups[ds.samples[i].u].push_back(i);

  DomainAccuracyTable table;
  std::int64_t src_correct = 0, tgt_correct = 0;
  for (auto& [u, idx] : groups) {
    DomainAccuracyRow row;
    row.u = u;
    row.split = ds.samples[idx.front()].split;
    row.n = static_cast<std::int64_t>(idx.size());
    auto pred = detail::predict_batch(m, ckpt.norm, ds, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Sample& s = ds.samples[idx[i]];
      if (!s.y) throw DataError("evaluate: sample without evaluation label");
      if (pred[i] == *s.y) ++row.correct;
    }
    row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.n);
    if (row.split == Split::Source) {
      table.source_n += row.n;
      src_correct += row.correct;
    } else {
      table.target_n += row.n;
      tgt_correct += row.correct;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.source_n > 0)
    table.source_accuracy = static_cast<double>(src_correct) / static_cast<double>(table.source_n);
  if (table.target_n > 0)
    table.target_accuracy = static_cast<double>(tgt_correct) / static_cast<double>(table.target_n);
  return table;
}

inline void write_accuracy_csv(const DomainAccuracyTable& table, std::int64_t d_u,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_accuracy_csv: cannot open " + path.string());
  for (std::int64_t j = 1; j <= d_u; ++j) out << "u" << j << ",";
  out << "split,n,accuracy\n";
  for (const auto& row : table.rows) {
    for (double v : row.u) out << fmt_g17(v) << ",";
    out << split_name(row.split) << "," << row.n << "," << fmt_g17(row.accuracy) << "\n";
  }
  for (std::int64_t j = 0; j < d_u; ++j) out << ",";
  out << "source-mean," << table.source_n << "," << fmt_g17(table.source_accuracy) << "\n";
  for (std::int64_t j = 0; j < d_u; ++j) out << ",";
  out << "target-mean," << table.target_n << "," << fmt_g17(table.target_accuracy) << "\n";
}

// ---- decision-boundary export -----------------------------------------------

struct BoundaryGrid {
  double x1_min = 0, x1_max = 1, x2_min = 0, x2_max = 1;
  std::int64_t res = 61;  // points per axis
};

// Regular-grid predictions at a fixed domain index, for external contour
// tools. Requires two input features.
inline void export_boundary(const Checkpoint& ckpt, const BoundaryGrid& grid,
                            const std::vector<double>& u_value, std::ostream& out) {
  if (ckpt.d_x() != 2) throw ShapeError("export_boundary: needs d_x == 2");
  if (static_cast<std::int64_t>(u_value.size()) != ckpt.d_u())
    throw ShapeError("export_boundary: index dimension mismatch");
  if (grid.res < 1) throw Error("export_boundary: resolution must be >= 1");
  ModelBundle m = build_models(ckpt);
  auto u_norm = ckpt.norm.apply(u_value);

  auto lin = [](double lo, double hi, std::int64_t res, std::int64_t i) {
    return res == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(res - 1);
  };

  const std::int64_t n = grid.res * grid.res;
  Tensor x(Shape{n, 2}), u(Shape{n, ckpt.d_u()});
  std::int64_t r = 0;
  for (std::int64_t i1 = 0; i1 < grid.res; ++i1)
    for (std::int64_t i2 = 0; i2 < grid.res; ++i2, ++r) {
      x.at(r, 0) = lin(grid.x1_min, grid.x1_max, grid.res, i1);
      x.at(r, 1) = lin(grid.x2_min, grid.x2_max, grid.res, i2);
      for (std::size_t j = 0; j < u_norm.size(); ++j)
        u.at(r, static_cast<std::int64_t>(j)) = u_norm[j];
    }

  Tape tape;
  Var z = m.encoder.encode(tape, tape.input(x), tape.input(std::move(u)), true);
  Var probs = ops::softmax(m.predictor.logits(tape, z, true));
  auto pred = argmax_rows(probs.val());

  if (ckpt.d_u() == 1) out << "x1,x2,u,pred,prob1\n";
  else {
    out << "x1,x2";
    for (std::int64_t j = 1; j <= ckpt.d_u(); ++j) out << ",u" << j;
    out << ",pred,prob1\n";
  }
  for (std::int64_t i = 0; i < n; ++i) {
    out << fmt_g17(x.at(i, 0)) << "," << fmt_g17(x.at(i, 1));
    for (double v : u_value) out << "," << fmt_g17(v);
    out << "," << pred[static_cast<std::size_t>(i)] << "," << fmt_g17(probs.val().at(i, 1))
        << "\n";
  }
}

// ---- index-recoverability probe ----------------------------------------

struct ProbeReport {
  std::vector<double> r2;  // one per index dimension
  double mean_r2 = 0.0;
};

namespace detail {
// Solves (A + ridge*I) x = b via Cholesky; A symmetric positive definite.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                                     std::int64_t n, double ridge) {
  for (std::int64_t i = 0; i < n; ++i) a[static_cast<std::size_t>(i * n + i)] += ridge;
  // in-place Cholesky a = L L^T
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) {
      double s = a[static_cast<std::size_t>(i * n + j)];
      for (std::int64_t k = 0; k < j; ++k)
        s -= a[static_cast<std::size_t>(i * n + k)] * a[static_cast<std::size_t>(j * n + k)];
      if (i == j) {
        if (s <= 0.0) throw NumericError("probe: normal equations are rank deficient");
        a[static_cast<std::size_t>(i * n + i)] = std::sqrt(s);
      } else {
        a[static_cast<std::size_t>(i * n + j)] = s / a[static_cast<std::size_t>(j * n + j)];
      }
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    double s = b[static_cast<std::size_t>(i)];
    for (std::int64_t k = 0; k < i; ++k)
      s -= a[static_cast<std::size_t>(i * n + k)] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i * n + i)];
  }
  for (std::int64_t i = n - 1; i >= 0; --i) {
    double s = b[static_cast<std::size_t>(i)];
    for (std::int64_t k = i + 1; k < n; ++k)
      s -= a[static_cast<std::size_t>(k * n + i)] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i * n + i)];
  }
  return b;
}
}  // namespace detail

// Closed-form ridge regression from the frozen encoding (plus intercept) to
// each normalized index dimension. Low R-squared is necessary evidence that
// the encoding carries no index information.
inline ProbeReport probe_independence(const Checkpoint& ckpt, const Dataset& ds,
                                      double ridge = 1e-6) {
  if (ridge < 0.0) throw Error("probe: ridge must be >= 0");
  if (ds.d_x != ckpt.d_x() || ds.d_u != ckpt.d_u())
    throw ShapeError("probe: dataset dims do not match checkpoint");
  const std::int64_t n = static_cast<std::int64_t>(ds.samples.size());
  const std::int64_t d_z = ckpt.d_z;
  if (n < d_z + 1) throw DataError("probe: need at least d_z + 1 samples");

  ModelBundle m = build_models(ckpt);
  std::vector<double> z(static_cast<std::size_t>(n * d_z));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    idx.push_back(i);
    if (idx.size() == 1024 || i + 1 == ds.samples.size()) {
      detail::encode_batch(m, ckpt.norm, ds, idx, i + 1 - idx.size(), z, d_z);
      idx.clear();
    }
  }

  const std::int64_t p = d_z + 1;  // + intercept
  std::vector<double> gram(static_cast<std::size_t>(p * p), 0.0);
  auto phi = [&](std::int64_t i, std::int64_t j) {
    return j < d_z ? z[static_cast<std::size_t>(i * d_z + j)] : 1.0;
  };
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t a = 0; a < p; ++a)
      for (std::int64_t b = a; b < p; ++b)
        gram[static_cast<std::size_t>(a * p + b)] += phi(i, a) * phi(i, b);
  for (std::int64_t a = 0; a < p; ++a)
    for (std::int64_t b = 0; b < a; ++b)
      gram[static_cast<std::size_t>(a * p + b)] = gram[static_cast<std::size_t>(b * p + a)];

  ProbeReport rep;
  for (std::int64_t dim = 0; dim < ds.d_u; ++dim) {
    std::vector<double> y(static_cast<std::size_t>(n));
    double y_mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] =
          ckpt.norm.apply(ds.samples[static_cast<std::size_t>(i)].u)[static_cast<std::size_t>(dim)];
      y_mean += y[static_cast<std::size_t>(i)];
    }
    y_mean /= static_cast<double>(n);
    double sst = 0.0, y_lo = y[0], y_hi = y[0];
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = y[static_cast<std::size_t>(i)] - y_mean;
      sst += d * d;
      y_lo = std::min(y_lo, y[static_cast<std::size_t>(i)]);
      y_hi = std::max(y_hi, y[static_cast<std::size_t>(i)]);
    }
    if (y_lo == y_hi)
      throw DataError("probe: index dimension " + std::to_string(dim + 1) + " is constant");

    std::vector<double> rhs(static_cast<std::size_t>(p), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t a = 0; a < p; ++a)
        rhs[static_cast<std::size_t>(a)] += phi(i, a) * y[static_cast<std::size_t>(i)];
    auto beta = detail::solve_spd(gram, rhs, p, ridge);

    double sse = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double fit = 0.0;
      for (std::int64_t a = 0; a < p; ++a)
        fit += phi(i, a) * beta[static_cast<std::size_t>(a)];
      const double d = fit - y[static_cast<std::size_t>(i)];
      sse += d * d;
    }
    rep.r2.push_back(1.0 - sse / sst);
  }
  for (double v : rep.r2) rep.mean_r2 += v;
  rep.mean_r2 /= static_cast<double>(rep.r2.size());
  return rep;
}

inline void write_probe_csv(const ProbeReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_probe_csv: cannot open " + path.string());
  out << "dim,r2\n";
  for (std::size_t j = 0; j < rep.r2.size(); ++j)
    out << "u" << (j + 1) << "," << fmt_g17(rep.r2[j]) << "\n";
  out << "mean," << fmt_g17(rep.mean_r2) << "\n";
}

}  // namespace cida
