#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cida/error.hpp"
#include "cida/util.hpp"

namespace cida {

enum class Method { SourceOnly, Cida, Pcida, PcidaGmm, CategoricalBaseline };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::SourceOnly: return "source-only";
    case Method::Cida: return "cida";
    case Method::Pcida: return "pcida";
    case Method::PcidaGmm: return "pcida-gmm";
    case Method::CategoricalBaseline: return "categorical-baseline";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "source-only") return Method::SourceOnly;
  if (s == "cida") return Method::Cida;
  if (s == "pcida") return Method::Pcida;
  if (s == "pcida-gmm") return Method::PcidaGmm;
  if (s == "categorical-baseline") return Method::CategoricalBaseline;
  throw DataError("unknown method '" + s + "'");
}

// Full description of a run. `dataset` is a generator name (circle, sine,
// circle2d) or a CSV path; generator evaluation sets are drawn with
// data_seed+1 so they are disjoint from training draws.
struct ExperimentConfig {
  std::string dataset;
  std::string eval_dataset;  // optional CSV path; empty = derive from dataset
  std::uint64_t data_seed = 0;
  int n_per_domain = 100;
  int eval_n_per_domain = 1000;

  Method method = Method::Cida;
  double lambda_d = 2.0;
  double lr = 1e-4;
  std::int64_t iterations = 20000;
  std::int64_t batch_source = 32;
  std::int64_t batch_target = 32;
  std::uint64_t seed = 0;
  std::int64_t d_z = 4;
  std::int64_t gmm_k = 3;
  std::int64_t bins = 5;
  double var_floor = 1e-4;

  // Optional override of the per-dimension index normalization; fitted from
  // the training data when empty.
  std::vector<double> u_min, u_max;

  std::string out_dir;

  void validate() const {
    if (dataset.empty()) throw DataError("config: dataset is required");
    if (lambda_d < 0.0) throw DataError("config: lambda_d must be >= 0");
    if (lr <= 0.0) throw DataError("config: lr must be > 0");
    if (iterations < 0) throw DataError("config: iterations must be >= 0");
    if (batch_source < 1 || batch_target < 1)
      throw DataError("config: batch sizes must be >= 1");
    if (d_z < 1) throw DataError("config: d_z must be >= 1");
    if (gmm_k < 1) throw DataError("config: gmm_k must be >= 1");
    if (bins < 2) throw DataError("config: bins must be >= 2");
    if (var_floor <= 0.0) throw DataError("config: var_floor must be > 0");
    if (n_per_domain < 1 || eval_n_per_domain < 1)
      throw DataError("config: n_per_domain must be >= 1");
    if (u_min.size() != u_max.size())
      throw DataError("config: u_min/u_max dimension mismatch");
    for (std::size_t j = 0; j < u_min.size(); ++j)
      if (!(u_min[j] < u_max[j]))
        throw DataError("config: u_min must be < u_max per dimension");
  }

  std::string default_out_dir() const {
    std::filesystem::path p(dataset);
    std::string base = is_generator(dataset) ? dataset : p.stem().string();
    return "runs/" + base + "_" + method_name(method) + "_s" + std::to_string(seed);
  }

  static bool is_generator(const std::string& name) {
    return name == "circle" || name == "sine" || name == "circle2d";
  }
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double(trim(tok), what));
  return out;
}
}  // namespace detail

// Flat `key = value` file. Blank lines and '#' comments are skipped; unknown
// keys are hard errors.
inline ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  bool have_out_dir = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError(where + ": expected 'key = value'");
    std::string key = detail::trim(t.substr(0, eq));
    std::string val = detail::trim(t.substr(eq + 1));
    if (key.empty() || val.empty()) throw DataError(where + ": empty key or value");

    if (key == "dataset") cfg.dataset = val;
    else if (key == "eval_dataset") cfg.eval_dataset = val;
    else if (key == "data_seed") cfg.data_seed = parse_uint(val, where);
    else if (key == "n_per_domain") cfg.n_per_domain = static_cast<int>(parse_int(val, where));
    else if (key == "eval_n_per_domain") cfg.eval_n_per_domain = static_cast<int>(parse_int(val, where));
    else if (key == "method") cfg.method = parse_method(val);
    else if (key == "lambda_d") cfg.lambda_d = parse_double(val, where);
    else if (key == "lr") cfg.lr = parse_double(val, where);
    else if (key == "iterations") cfg.iterations = parse_int(val, where);
    else if (key == "batch_source") cfg.batch_source = parse_int(val, where);
    else if (key == "batch_target") cfg.batch_target = parse_int(val, where);
    else if (key == "seed") cfg.seed = parse_uint(val, where);
    else if (key == "d_z") cfg.d_z = parse_int(val, where);
    else if (key == "gmm_k") cfg.gmm_k = parse_int(val, where);
    else if (key == "bins") cfg.bins = parse_int(val, where);
    else if (key == "var_floor") cfg.var_floor = parse_double(val, where);
    else if (key == "u_min") cfg.u_min = detail::parse_double_list(val, where);
    else if (key == "u_max") cfg.u_max = detail::parse_double_list(val, where);
    else if (key == "out_dir") { cfg.out_dir = val; have_out_dir = true; }
    else throw DataError(where + ": unknown key '" + key + "'");
  }
  if (!have_out_dir) cfg.out_dir = cfg.default_out_dir();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  return parse_config(in, path.string());
}

}  // namespace cida
