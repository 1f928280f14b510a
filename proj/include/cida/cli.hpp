#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cida/experiment.hpp"
#include "cida/gradcheck_suite.hpp"
#include "cida/oracle_suite.hpp"

namespace cida {

namespace cli_detail {

inline std::vector<double> parse_u_values(const std::string& s) {
  auto vals = detail::parse_double_list(s, "--u");
  if (vals.empty()) throw UsageError("--u: expected at least one value");
  return vals;
}

inline BoundaryGrid parse_grid(const std::string& s) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : s) {
    if (c == ':') {
      f.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  f.push_back(cur);
  if (f.size() != 5)
    throw UsageError("--grid: expected X1MIN:X1MAX:X2MIN:X2MAX:RES, got '" + s + "'");
  BoundaryGrid g;
  g.x1_min = parse_double(f[0], "--grid");
  g.x1_max = parse_double(f[1], "--grid");
  g.x2_min = parse_double(f[2], "--grid");
  g.x2_max = parse_double(f[3], "--grid");
  g.res = parse_int(f[4], "--grid");
  if (g.res < 1) throw UsageError("--grid: resolution must be >= 1");
  return g;
}

inline void print_accuracy_summary(const DomainAccuracyTable& table) {
  std::cout << "source accuracy " << fmt_g(table.source_accuracy) << " over " << table.source_n
            << " samples\n";
  std::cout << "target accuracy " << fmt_g(table.target_accuracy) << " over " << table.target_n
            << " samples\n";
}

}  // namespace cli_detail

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure,
// 4 oracle/gradcheck failure.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"continuously indexed domain adaptation: training, evaluation, and exact "
               "verification of the alignment theory"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a synthetic benchmark dataset as CSV");
  std::string gen_dataset, gen_out;
  std::uint64_t gen_seed = 0;
  int gen_n = 100;
  gen->add_option("--dataset", gen_dataset, "circle | sine | circle2d")
      ->required()
      ->check(CLI::IsMember({"circle", "sine", "circle2d"}));
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n", gen_n, "samples per domain")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output CSV path")->required();

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "config file path")->required();

  auto* eval_cmd = app.add_subcommand("eval", "per-domain accuracy of a checkpoint");
  std::string eval_ckpt, eval_data, eval_out;
  eval_cmd->add_option("--ckpt", eval_ckpt)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--out", eval_out)->required();

  auto* bnd = app.add_subcommand("boundary", "export grid predictions at a fixed index");
  std::string bnd_ckpt, bnd_u, bnd_grid, bnd_out;
  bnd->add_option("--ckpt", bnd_ckpt)->required();
  bnd->add_option("--u", bnd_u, "index value (comma-separated for multi-dimensional)")
      ->required();
  bnd->add_option("--grid", bnd_grid, "X1MIN:X1MAX:X2MIN:X2MAX:RES")->required();
  bnd->add_option("--out", bnd_out)->required();

  auto* probe_cmd = app.add_subcommand("probe", "index-recoverability probe of an encoding");
  std::string probe_ckpt, probe_data, probe_out;
  double probe_ridge = 1e-6;
  probe_cmd->add_option("--ckpt", probe_ckpt)->required();
  probe_cmd->add_option("--data", probe_data)->required();
  probe_cmd->add_option("--out", probe_out)->required();
  probe_cmd->add_option("--ridge", probe_ridge, "ridge strength (default 1e-6)");

  auto* oracle_cmd = app.add_subcommand("oracle", "run the exact theory checks");
  std::string oracle_which;
  std::uint64_t oracle_seed = 0;
  oracle_cmd->add_option("--suite", oracle_which, "lemmas | theorems | appendix | all")
      ->required()
      ->check(CLI::IsMember({"lemmas", "theorems", "appendix", "all"}));
  oracle_cmd->add_option("--seed", oracle_seed, "suite seed");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of all ops and losses");
  std::uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "suite seed");

  auto* run_cmd = app.add_subcommand("run", "full experiment: data, training, evaluation");
  std::string run_config;
  run_cmd->add_option("--config", run_config, "config file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      Dataset ds = generate_dataset(gen_dataset, gen_seed, gen_n);
      write_csv(ds, gen_out);
      std::cout << "wrote " << ds.samples.size() << " rows to " << gen_out << "\n";
    } else if (train_cmd->parsed()) {
      ExperimentConfig cfg = parse_config_file(train_config);
      Dataset ds = load_train_dataset(cfg);
      TrainResult result = train(cfg, ds);
      std::filesystem::create_directories(cfg.out_dir);
      save_checkpoint(result.checkpoint, std::filesystem::path(cfg.out_dir) / "checkpoint.ckpt");
      write_history_csv(result.history, std::filesystem::path(cfg.out_dir) / "history.csv");
      std::cout << "checkpoint written to " << cfg.out_dir << "/checkpoint.ckpt\n";
    } else if (eval_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(eval_ckpt);
      Dataset ds = read_csv(eval_data);
      DomainAccuracyTable table = evaluate(ckpt, ds);
      write_accuracy_csv(table, ds.d_u, eval_out);
      cli_detail::print_accuracy_summary(table);
    } else if (bnd->parsed()) {
      Checkpoint ckpt = load_checkpoint(bnd_ckpt);
      std::ofstream out(bnd_out);
      if (!out) throw DataError("boundary: cannot open " + bnd_out);
      export_boundary(ckpt, cli_detail::parse_grid(bnd_grid), cli_detail::parse_u_values(bnd_u),
                      out);
    } else if (probe_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(probe_ckpt);
      Dataset ds = read_csv(probe_data);
      ProbeReport rep = probe_independence(ckpt, ds, probe_ridge);
      write_probe_csv(rep, probe_out);
      std::cout << "mean probe R2 " << fmt_g(rep.mean_r2) << "\n";
    } else if (oracle_cmd->parsed()) {
      auto rep = oracle::oracle_suite(oracle_which, oracle_seed);
      rep.print(std::cout);
      if (!rep.all_pass()) return 4;
    } else if (gc->parsed()) {
      auto rep = gradcheck_suite(gc_seed);
      rep.print(std::cout);
      if (!rep.all_pass()) return 4;
    } else if (run_cmd->parsed()) {
      ExperimentConfig cfg = parse_config_file(run_config);
      ExperimentSummary summary = run_experiment(cfg);
      std::cout << "bundle written to " << summary.out_dir.string() << "\n";
      cli_detail::print_accuracy_summary(summary.accuracy);
      std::cout << "mean probe R2 " << fmt_g(summary.probe.mean_r2) << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const OracleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cida
