#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cida/config.hpp"
#include "cida/dataset.hpp"
#include "cida/models.hpp"
#include "cida/util.hpp"

namespace cida {

inline constexpr const char* kCheckpointHeader = "CIDA-CKPT v1";

// Persisted model bundle. The text format is versioned and fully decimal:
//   line 1  "CIDA-CKPT v1"
//   line 2  method name
//   line 3  layer manifest, one network per ';' block, sizes space-separated
//   line 4  lambda_d lr seed d_z var_floor
//   line 5  per-dimension index normalization as "min:max" pairs
//   then one parameter per line (17 significant digits) in manifest order:
//   E, F, D; per layer weights row-major, then biases.
struct Checkpoint {
  Method method = Method::Cida;
  std::vector<std::int64_t> e_sizes, f_sizes, d_sizes;
  double lambda_d = 0.0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::int64_t d_z = 0;
  double var_floor = kVarFloor;
  IndexNormalization norm;
  std::vector<double> params;

  // Run summary, not persisted in the checkpoint file.
  double final_v_p = 0.0;
  std::optional<double> final_v_d;

  std::int64_t d_u() const { return static_cast<std::int64_t>(norm.min.size()); }
  std::int64_t d_x() const { return e_sizes.front() - d_u(); }
  std::int64_t n_classes() const { return f_sizes.back(); }

  DiscKind disc_kind() const {
    switch (method) {
      case Method::Pcida: return DiscKind::Gaussian;
      case Method::PcidaGmm: return DiscKind::Gmm;
      case Method::CategoricalBaseline: return DiscKind::Categorical;
      default: return DiscKind::Point;
    }
  }

  std::int64_t gmm_k() const {
    return method == Method::PcidaGmm ? d_sizes.back() / (1 + 2 * d_u()) : 1;
  }

  std::int64_t bins() const {
    return method == Method::CategoricalBaseline ? d_sizes.back() : 0;
  }

  static std::int64_t manifest_count(const std::vector<std::int64_t>& sizes) {
    std::int64_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
  }

  std::int64_t expected_param_count() const {
    return manifest_count(e_sizes) + manifest_count(f_sizes) + manifest_count(d_sizes);
  }
};

namespace detail {
inline std::string join_sizes(const std::vector<std::int64_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += " ";
    out += std::to_string(sizes[i]);
  }
  return out;
}

inline std::vector<std::int64_t> parse_sizes(const std::string& s, const std::string& where) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(parse_int(tok, where));
  if (out.size() < 2) throw DataError(where + ": network manifest needs >= 2 sizes");
  return out;
}
}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (static_cast<std::int64_t>(ckpt.params.size()) != ckpt.expected_param_count())
    throw DataError("save_checkpoint: manifest/value-count mismatch");
  std::ofstream out(path);
  if (!out) throw DataError("save_checkpoint: cannot open " + path.string());
  out << kCheckpointHeader << "\n";
  out << method_name(ckpt.method) << "\n";
  out << detail::join_sizes(ckpt.e_sizes) << ";" << detail::join_sizes(ckpt.f_sizes) << ";"
      << detail::join_sizes(ckpt.d_sizes) << "\n";
  out << fmt_g17(ckpt.lambda_d) << " " << fmt_g17(ckpt.lr) << " " << ckpt.seed << " "
      << ckpt.d_z << " " << fmt_g17(ckpt.var_floor) << "\n";
  for (std::size_t j = 0; j < ckpt.norm.min.size(); ++j) {
    if (j) out << " ";
    out << fmt_g17(ckpt.norm.min[j]) << ":" << fmt_g17(ckpt.norm.max[j]);
  }
  out << "\n";
  for (double v : ckpt.params) out << fmt_g17(v) << "\n";
  if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
  auto next_line = [&](std::string& line, std::size_t line_no) {
    if (!std::getline(in, line))
      throw DataError("load_checkpoint: " + path.string() + ": truncated at line " +
                      std::to_string(line_no));
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  Checkpoint ckpt;
  std::string line;
  next_line(line, 1);
  if (line != kCheckpointHeader)
    throw DataError("load_checkpoint: " + path.string() + ": unsupported version '" + line +
                    "' (expected '" + std::string(kCheckpointHeader) + "')");
  next_line(line, 2);
  ckpt.method = parse_method(line);

  next_line(line, 3);
  {
    std::stringstream ss(line);
    std::string block;
    std::vector<std::vector<std::int64_t>> nets;
    while (std::getline(ss, block, ';'))
      nets.push_back(detail::parse_sizes(block, path.string() + ":3"));
    if (nets.size() != 3)
      throw DataError("load_checkpoint: " + path.string() + ":3: expected 3 networks");
    ckpt.e_sizes = nets[0];
    ckpt.f_sizes = nets[1];
    ckpt.d_sizes = nets[2];
  }

  next_line(line, 4);
  {
    std::stringstream ss(line);
    std::string a, b, c, d, e;
    if (!(ss >> a >> b >> c >> d >> e))
      throw DataError("load_checkpoint: " + path.string() + ":4: expected 5 fields");
    const std::string where = path.string() + ":4";
    ckpt.lambda_d = parse_double(a, where);
    ckpt.lr = parse_double(b, where);
    ckpt.seed = parse_uint(c, where);
    ckpt.d_z = parse_int(d, where);
    ckpt.var_floor = parse_double(e, where);
  }

  next_line(line, 5);
  {
    std::stringstream ss(line);
    std::string pair;
    const std::string where = path.string() + ":5";
    while (ss >> pair) {
      auto colon = pair.find(':');
      if (colon == std::string::npos) throw DataError(where + ": expected min:max pair");
      ckpt.norm.min.push_back(parse_double(pair.substr(0, colon), where));
      ckpt.norm.max.push_back(parse_double(pair.substr(colon + 1), where));
    }
    if (ckpt.norm.min.empty()) throw DataError(where + ": no normalization pairs");
  }

  const std::int64_t expected = ckpt.expected_param_count();
  ckpt.params.reserve(static_cast<std::size_t>(expected));
  std::size_t line_no = 5;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ckpt.params.push_back(parse_double(line, path.string() + ":" + std::to_string(line_no)));
  }
  if (static_cast<std::int64_t>(ckpt.params.size()) != expected)
    throw DataError("load_checkpoint: " + path.string() + ": manifest expects " +
                    std::to_string(expected) + " parameters, file holds " +
                    std::to_string(ckpt.params.size()));
  return ckpt;
}

// Frozen model bundle reconstructed from a checkpoint.
struct ModelBundle {
  EncoderE encoder;
  PredictorF predictor;
  DiscriminatorD discriminator;
};

inline ModelBundle build_models(const Checkpoint& ckpt) {
  ModelBundle m{
      EncoderE{Mlp::init(ckpt.e_sizes, Activation::Relu, 0), ckpt.d_x(), ckpt.d_u(), ckpt.d_z},
      PredictorF{Mlp::init(ckpt.f_sizes, Activation::Relu, 0), ckpt.n_classes()},
      DiscriminatorD{ckpt.disc_kind(), Mlp::init(ckpt.d_sizes, Activation::Relu, 0),
                     ckpt.d_u(), ckpt.gmm_k(), ckpt.bins(), ckpt.var_floor}};
  std::size_t cursor = 0;
  m.encoder.net.load_flat(ckpt.params, cursor);
  m.predictor.net.load_flat(ckpt.params, cursor);
  m.discriminator.net.load_flat(ckpt.params, cursor);
  if (cursor != ckpt.params.size())
    throw DataError("build_models: parameter count mismatch");
  return m;
}

}  // namespace cida
