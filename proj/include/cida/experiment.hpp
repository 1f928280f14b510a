#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "cida/eval.hpp"
#include "cida/trainer.hpp"

namespace cida {

inline Dataset load_train_dataset(const ExperimentConfig& cfg) {
  if (ExperimentConfig::is_generator(cfg.dataset))
    return generate_dataset(cfg.dataset, cfg.data_seed, cfg.n_per_domain);
  return read_csv(cfg.dataset);
}

inline Dataset load_eval_dataset(const ExperimentConfig& cfg) {
  if (!cfg.eval_dataset.empty()) return read_csv(cfg.eval_dataset);
  if (ExperimentConfig::is_generator(cfg.dataset))
    return generate_dataset(cfg.dataset, cfg.data_seed + 1, cfg.eval_n_per_domain);
  return read_csv(cfg.dataset);
}

inline void write_history_csv(const std::vector<HistoryRow>& history,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_history_csv: cannot open " + path.string());
  out << "iteration,V_p,V_d\n";
  for (const auto& row : history) {
    out << row.iteration << "," << fmt_g17(row.v_p) << ",";
    if (row.v_d) out << fmt_g17(*row.v_d);
    out << "\n";
  }
}

struct ExperimentSummary {
  std::filesystem::path out_dir;
  DomainAccuracyTable accuracy;
  ProbeReport probe;
};

// Full orchestration: load/generate data, train, evaluate, and write a
// self-contained bundle (checkpoint, history, per-domain accuracy, probe,
// and per-index-level boundary CSVs). Output is a pure function of the
// config and dataset bytes: no timestamps, fixed orderings.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset train_ds = load_train_dataset(cfg);
  const Dataset eval_ds = load_eval_dataset(cfg);

  TrainResult result = train(cfg, train_ds);

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  save_checkpoint(result.checkpoint, dir / "checkpoint.ckpt");
  write_history_csv(result.history, dir / "history.csv");

  ExperimentSummary summary;
  summary.out_dir = dir;
  summary.accuracy = evaluate(result.checkpoint, eval_ds);
  write_accuracy_csv(summary.accuracy, eval_ds.d_u, dir / "accuracy.csv");
  summary.probe = probe_independence(result.checkpoint, eval_ds, 1e-6);
  write_probe_csv(summary.probe, dir / "probe.csv");

  if (eval_ds.d_x == 2) {
    double x1_lo = 0, x1_hi = 0, x2_lo = 0, x2_hi = 0;
    bool first = true;
    for (const Sample& s : eval_ds.samples) {
      if (first || s.x[0] < x1_lo) x1_lo = s.x[0];
      if (first || s.x[0] > x1_hi) x1_hi = s.x[0];
      if (first || s.x[1] < x2_lo) x2_lo = s.x[1];
      if (first || s.x[1] > x2_hi) x2_hi = s.x[1];
      first = false;
    }
    const double pad1 = 0.1 * (x1_hi - x1_lo), pad2 = 0.1 * (x2_hi - x2_lo);
    BoundaryGrid grid{x1_lo - pad1, x1_hi + pad1, x2_lo - pad2, x2_hi + pad2, 61};
    for (const auto& row : summary.accuracy.rows) {
      std::string name = "boundary_u";
      for (std::size_t j = 0; j < row.u.size(); ++j) {
        if (j) name += "_";
        name += fmt_g(row.u[j]);
      }
      std::ofstream out(dir / (name + ".csv"));
      if (!out) throw DataError("run_experiment: cannot open boundary CSV");
      export_boundary(result.checkpoint, grid, row.u, out);
    }
  }
  return summary;
}

}  // namespace cida
