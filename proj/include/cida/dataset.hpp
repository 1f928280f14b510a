#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cida/error.hpp"
#include "cida/rng.hpp"
#include "cida/util.hpp"

namespace cida {

enum class Split { Source, Target };

inline std::string split_name(Split s) { return s == Split::Source ? "source" : "target"; }

// One observation: features x, raw domain index u, class label y, split tag.
// Labels exist for target rows too, but only as a held-out evaluation
// column; training views never read them.
struct Sample {
  std::vector<double> x;
  std::vector<double> u;
  std::optional<int> y;
  Split split = Split::Source;
};

struct Dataset {
  std::string name;
  std::int64_t d_x = 0, d_u = 0;
  int n_classes = 2;
  std::vector<Sample> samples;
  std::vector<double> u_min, u_max;  // per-dimension index range over all samples

  void compute_index_range() {
    u_min.assign(static_cast<std::size_t>(d_u), 0.0);
    u_max.assign(static_cast<std::size_t>(d_u), 0.0);
    bool first = true;
    for (const Sample& s : samples) {
      for (std::int64_t j = 0; j < d_u; ++j) {
        double v = s.u[static_cast<std::size_t>(j)];
        if (first || v < u_min[static_cast<std::size_t>(j)]) u_min[static_cast<std::size_t>(j)] = v;
        if (first || v > u_max[static_cast<std::size_t>(j)]) u_max[static_cast<std::size_t>(j)] = v;
      }
      first = false;
    }
  }

  std::vector<std::size_t> split_indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].split == split) out.push_back(i);
    return out;
  }

  std::size_t count(Split split) const { return split_indices(split).size(); }
};

// ---- generators ---------------------------------------------------------
//
// Binary classification benchmarks whose decision boundary drifts
// continuously with the domain index; labels are a deterministic function
// of x, so the tasks are noise-free.

// 30 Gaussian blobs centered on a half circle of radius 10; u_k = k in 1..30,
// domains 1-6 are the source split. Label: outside vs inside the circle.
inline Dataset gen_circle(std::uint64_t seed, int n_per_domain) {
  if (n_per_domain < 1) throw Error("gen_circle: n_per_domain must be >= 1");
  constexpr double radius = 10.0;
  constexpr double spread = 1.5;
  Dataset ds;
  ds.name = "circle";
  ds.d_x = 2;
  ds.d_u = 1;
  Rng rng(seed);
  for (int k = 1; k <= 30; ++k) {
    const double alpha = M_PI * static_cast<double>(k - 1) / 29.0;
    const double cx = radius * std::cos(alpha);
    const double cy = radius * std::sin(alpha);
    const Split split = k <= 6 ? Split::Source : Split::Target;
    for (int i = 0; i < n_per_domain; ++i) {
      Sample s;
      const double x1 = cx + rng.normal(0.0, spread);
      const double x2 = cy + rng.normal(0.0, spread);
      s.x = {x1, x2};
      s.u = {static_cast<double>(k)};
      s.y = std::hypot(x1, x2) > radius ? 1 : 0;
      s.split = split;
      ds.samples.push_back(std::move(s));
    }
  }
  ds.compute_index_range();
  return ds;
}

// 12 domains spanning two sine periods; domain k covers x1 in
// [(k-1)*pi/3, k*pi/3), x2 is uniform in [-2,2], label: above vs below the
// sine curve. Domains 1-5 are the source split.
inline Dataset gen_sine(std::uint64_t seed, int n_per_domain) {
  if (n_per_domain < 1) throw Error("gen_sine: n_per_domain must be >= 1");
  Dataset ds;
  ds.name = "sine";
  ds.d_x = 2;
  ds.d_u = 1;
  Rng rng(seed);
  for (int k = 1; k <= 12; ++k) {
    const double lo = static_cast<double>(k - 1) * M_PI / 3.0;
    const double hi = static_cast<double>(k) * M_PI / 3.0;
    const Split split = k <= 5 ? Split::Source : Split::Target;
    for (int i = 0; i < n_per_domain; ++i) {
      Sample s;
      const double x1 = rng.uniform(lo, hi);
      const double x2 = rng.uniform(-2.0, 2.0);
      s.x = {x1, x2};
      s.u = {static_cast<double>(k)};
      s.y = x2 > std::sin(x1) ? 1 : 0;
      s.split = split;
      ds.samples.push_back(std::move(s));
    }
  }
  ds.compute_index_range();
  return ds;
}

// Two-dimensional index variant of the circle task: u = (angle step j,
// radius scale s) over 15 angles x 3 scales; source domains are j in
// {1,2,3} at every scale.
inline Dataset gen_circle_2d(std::uint64_t seed, int n_per_domain) {
  if (n_per_domain < 1) throw Error("gen_circle_2d: n_per_domain must be >= 1");
  constexpr double base_radius = 10.0;
  constexpr double spread = 1.5;
  const double scales[3] = {0.8, 1.0, 1.2};
  Dataset ds;
  ds.name = "circle2d";
  ds.d_x = 2;
  ds.d_u = 2;
  Rng rng(seed);
  for (int j = 1; j <= 15; ++j) {
    const double alpha = M_PI * static_cast<double>(j - 1) / 14.0;
    for (double s_scale : scales) {
      const double r = base_radius * s_scale;
      const double cx = r * std::cos(alpha);
      const double cy = r * std::sin(alpha);
      const Split split = j <= 3 ? Split::Source : Split::Target;
      for (int i = 0; i < n_per_domain; ++i) {
        Sample s;
        const double x1 = cx + rng.normal(0.0, spread);
        const double x2 = cy + rng.normal(0.0, spread);
        s.x = {x1, x2};
        s.u = {static_cast<double>(j), s_scale};
        s.y = std::hypot(x1, x2) > r ? 1 : 0;
        s.split = split;
        ds.samples.push_back(std::move(s));
      }
    }
  }
  ds.compute_index_range();
  return ds;
}

inline Dataset generate_dataset(const std::string& name, std::uint64_t seed,
                                int n_per_domain) {
  if (name == "circle") return gen_circle(seed, n_per_domain);
  if (name == "sine") return gen_sine(seed, n_per_domain);
  if (name == "circle2d") return gen_circle_2d(seed, n_per_domain);
  throw DataError("unknown dataset generator: " + name);
}

inline bool is_generator_name(const std::string& name) {
  return name == "circle" || name == "sine" || name == "circle2d";
}

// ---- index normalization --------------------------------------------------

// Per-dimension affine map of raw indices onto [0,1], fit over
// source + target and persisted with checkpoints so evaluation reuses the
// training-time map.
struct IndexNormalization {
  std::vector<double> min, max;

  std::size_t dims() const { return min.size(); }

  std::vector<double> apply(const std::vector<double>& u) const {
    if (u.size() != min.size()) throw ShapeError("normalize: index dim mismatch");
    std::vector<double> out(u.size());
    for (std::size_t j = 0; j < u.size(); ++j)
      out[j] = (u[j] - min[j]) / (max[j] - min[j]);
    return out;
  }
};

inline IndexNormalization normalize_index(const Dataset& ds) {
  IndexNormalization norm{ds.u_min, ds.u_max};
  for (std::size_t j = 0; j < norm.min.size(); ++j)
    if (!(norm.min[j] < norm.max[j]))
      throw DataError("normalize_index: degenerate index dimension " + std::to_string(j + 1));
  return norm;
}

// Normalized copy of a dataset (indices mapped through the given map).
inline Dataset normalized_view(const Dataset& ds, const IndexNormalization& norm) {
  Dataset out = ds;
  for (Sample& s : out.samples) s.u = norm.apply(s.u);
  out.compute_index_range();
  return out;
}

// ---- CSV -------------------------------------------------------------------
//
// Header: x1,...,xd,u1,...,ud,y,split. Reals carry 17 significant digits;
// y may be empty for unlabeled rows; split is "source" or "target".

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_csv: cannot open " + path.string());
  for (std::int64_t j = 1; j <= ds.d_x; ++j) out << "x" << j << ",";
  for (std::int64_t j = 1; j <= ds.d_u; ++j) out << "u" << j << ",";
  out << "y,split\n";
  for (const Sample& s : ds.samples) {
    for (double v : s.x) out << fmt_g17(v) << ",";
    for (double v : s.u) out << fmt_g17(v) << ",";
    if (s.y) out << *s.y;
    out << "," << split_name(s.split) << "\n";
  }
  if (!out) throw DataError("write_csv: write failed for " + path.string());
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

inline Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw DataError("read_csv: missing header in " + path.string());

  auto cols = detail::split_csv_line(line);
  std::int64_t d_x = 0, d_u = 0;
  std::size_t c = 0;
  while (c < cols.size() && cols[c] == "x" + std::to_string(d_x + 1)) { ++d_x; ++c; }
  while (c < cols.size() && cols[c] == "u" + std::to_string(d_u + 1)) { ++d_u; ++c; }
  if (d_x < 1 || d_u < 1 || c + 2 != cols.size() || cols[c] != "y" || cols[c + 1] != "split")
    throw DataError("read_csv: header mismatch in " + path.string() + ": '" + line + "'");

  Dataset ds;
  ds.name = path.stem().string();
  ds.d_x = d_x;
  ds.d_u = d_u;
  int max_label = 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (static_cast<std::int64_t>(f.size()) != d_x + d_u + 2)
      throw DataError("read_csv: " + where + ": expected " + std::to_string(d_x + d_u + 2) +
                      " fields, got " + std::to_string(f.size()));
    Sample s;
    for (std::int64_t j = 0; j < d_x; ++j)
      s.x.push_back(parse_double(f[static_cast<std::size_t>(j)], where));
    for (std::int64_t j = 0; j < d_u; ++j)
      s.u.push_back(parse_double(f[static_cast<std::size_t>(d_x + j)], where));
    const std::string& ys = f[static_cast<std::size_t>(d_x + d_u)];
    if (!ys.empty()) {
      long long y = parse_int(ys, where);
      if (y < 0) throw DataError("read_csv: " + where + ": negative label");
      s.y = static_cast<int>(y);
      max_label = std::max(max_label, static_cast<int>(y));
    }
    const std::string& sp = f[static_cast<std::size_t>(d_x + d_u + 1)];
    if (sp == "source") s.split = Split::Source;
    else if (sp == "target") s.split = Split::Target;
    else throw DataError("read_csv: " + where + ": bad split tag '" + sp + "'");
    ds.samples.push_back(std::move(s));
  }
  ds.n_classes = max_label + 1;
  ds.compute_index_range();
  return ds;
}

}  // namespace cida
