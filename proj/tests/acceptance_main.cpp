// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.
// Benchmark runs execute in parallel worker threads; each run itself is
// single-threaded and deterministic.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cida/experiment.hpp"
#include "cida/gradcheck_suite.hpp"
#include "cida/oracle_suite.hpp"

using namespace cida;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---- benchmark run plumbing -------------------------------------------------

struct RunJob {
  std::string dataset;
  Method method;
  std::uint64_t seed;
  ExperimentSummary summary;
  double elapsed_s = 0.0;
};

ExperimentConfig benchmark_config(const RunJob& job, const fs::path& root) {
  ExperimentConfig cfg;
  cfg.dataset = job.dataset;
  cfg.method = job.method;
  cfg.seed = job.seed;
  cfg.data_seed = 0;
  cfg.n_per_domain = 100;
  cfg.eval_n_per_domain = 1000;
  cfg.lambda_d = 2.0;
  cfg.lr = 1e-4;
  cfg.iterations = 20000;
  cfg.batch_source = 32;
  cfg.batch_target = 32;
  cfg.out_dir = (root / (job.dataset + "_" + method_name(job.method) + "_s" +
                         std::to_string(job.seed)))
                    .string();
  return cfg;
}

void run_jobs(std::vector<RunJob>& jobs, const fs::path& root) {
  std::atomic<std::size_t> next{0};
  unsigned workers = std::max(2u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, 4);
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      auto t0 = std::chrono::steady_clock::now();
      jobs[i].summary = run_experiment(benchmark_config(jobs[i], root));
      jobs[i].elapsed_s = seconds_since(t0);
      std::fprintf(stderr, "  run %s %s seed %llu: target acc %.4f (%.0f s)\n",
                   jobs[i].dataset.c_str(), method_name(jobs[i].method).c_str(),
                   static_cast<unsigned long long>(jobs[i].seed),
                   jobs[i].summary.accuracy.target_accuracy, jobs[i].elapsed_s);
      std::fflush(stderr);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

const RunJob& find_job(const std::vector<RunJob>& jobs, const std::string& dataset,
                       Method method, std::uint64_t seed) {
  for (const auto& j : jobs)
    if (j.dataset == dataset && j.method == method && j.seed == seed) return j;
  throw Error("acceptance: missing job");
}

double mean_target_accuracy(const std::vector<RunJob>& jobs, const std::string& dataset,
                            Method method) {
  double acc = 0.0;
  int n = 0;
  for (const auto& j : jobs)
    if (j.dataset == dataset && j.method == method) {
      acc += j.summary.accuracy.target_accuracy;
      ++n;
    }
  return acc / n;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool directories_identical(const fs::path& a, const fs::path& b, std::string& why) {
  std::map<std::string, fs::path> fa, fb;
  for (const auto& e : fs::directory_iterator(a)) fa[e.path().filename().string()] = e.path();
  for (const auto& e : fs::directory_iterator(b)) fb[e.path().filename().string()] = e.path();
  if (fa.size() != fb.size()) {
    why = "file counts differ";
    return false;
  }
  for (const auto& [name, pa] : fa) {
    auto it = fb.find(name);
    if (it == fb.end()) {
      why = "missing " + name;
      return false;
    }
    if (read_bytes(pa) != read_bytes(it->second)) {
      why = name + " differs";
      return false;
    }
  }
  return true;
}

// ---- criteria 1-5 and 10 ------------------------------------------------

Criterion criterion_oracle_discriminators() {
  auto t0 = std::chrono::steady_clock::now();
  auto rep = oracle::suite_lemmas(0);
  double elapsed = seconds_since(t0);
  Criterion c;
  c.pass = rep.all_pass() && elapsed < 10.0;
  c.detail = std::to_string(rep.lines.size()) + " checks, " +
             std::to_string(rep.fail_count()) + " failed, " + fmt(elapsed) + " s";
  return c;
}

Criterion criterion_cida_bound() {
  Criterion c;
  Rng rng(202);
  double max_excess = -1e300, max_tv_dev = 0.0, max_product_gap = 0.0;
  try {
    for (int k = 0; k < 200; ++k) {
      auto r = oracle::cida_criterion(oracle::random_joint(rng, 8, 8));
      max_excess = std::max(max_excess, r.c_d - r.bound);
      max_tv_dev = std::max(max_tv_dev, std::abs(r.gap - r.mean_var));
    }
    for (int k = 0; k < 50; ++k) {
      auto r = oracle::cida_criterion(oracle::random_product_joint(rng, 8, 8));
      max_product_gap = std::max(max_product_gap, std::abs(r.gap));
    }
    c.pass = max_excess <= 1e-12 && max_tv_dev <= 1e-12 && max_product_gap < 1e-12;
  } catch (const Error& e) {
    c.pass = false;
    c.detail = e.what();
    return c;
  }
  c.detail = "max excess " + fmt(max_excess) + ", total-variance dev " + fmt(max_tv_dev) +
             ", product gap " + fmt(max_product_gap);
  return c;
}

Criterion criterion_pcida_bound() {
  Criterion c;
  Rng rng(203);
  double max_excess = -1e300;
  try {
    for (int k = 0; k < 200; ++k) {
      auto r = oracle::pcida_criterion(oracle::random_joint(rng, 8, 8));
      max_excess = std::max(max_excess, r.c_d - r.bound);
    }
    oracle::DiscreteJoint uniform4;
    uniform4.n_z = 2;
    uniform4.u_values = {1.0, 2.0, 3.0, 4.0};
    uniform4.p = {0.15, 0.15, 0.15, 0.15, 0.10, 0.10, 0.10, 0.10};
    auto r = oracle::pcida_criterion(uniform4);
    const double want = 0.5 + 0.5 * std::log(1.25);
    c.pass = max_excess <= 1e-12 && std::abs(r.c_d - want) <= 1e-12;
    c.detail = "max excess " + fmt(max_excess) + ", independent uniform value " +
               fmt(r.c_d) + " vs " + fmt(want);
  } catch (const Error& e) {
    c.pass = false;
    c.detail = e.what();
  }
  return c;
}

Criterion criterion_predictor_and_full_game() {
  Criterion c;
  Rng rng(204);
  double max_table_dev = 0.0, min_margin = 1e300, max_h_dev = 0.0, max_align = 0.0;
  try {
    for (int k = 0; k < 50; ++k) {
      auto j = oracle::random_labeled_product_joint(rng, 4, 4, 3);
      auto pb = oracle::predictor_bound(j, rng, 100);
      max_table_dev = std::max(max_table_dev, std::abs(pb.table_loss - pb.h_y_given_z));
      min_margin = std::min(min_margin, pb.min_random_margin);
      auto fg = oracle::full_game_construction(j);
      max_h_dev = std::max(max_h_dev, std::abs(fg.h_y_given_z - fg.h_y_given_xu));
      max_align = std::max(max_align, fg.max_alignment_dev);
    }
    c.pass = max_table_dev <= 1e-12 && min_margin > 0.0 && max_h_dev <= 1e-12 &&
             max_align <= 1e-12;
    c.detail = "entropy dev " + fmt(max_h_dev) + ", alignment dev " + fmt(max_align) +
               ", random-predictor margin " + fmt(min_margin);
  } catch (const Error& e) {
    c.pass = false;
    c.detail = e.what();
  }
  return c;
}

Criterion criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  auto rep = gradcheck_losses(2024);
  double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (const auto& l : rep.lines) worst = std::max(worst, l.lhs);
  Criterion c;
  c.pass = rep.all_pass() && elapsed < 30.0;
  c.detail = "worst relative error " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return c;
}

Criterion criterion_determinism(const fs::path& root) {
  Criterion c;
  c.pass = true;
  ExperimentConfig cfg;
  cfg.dataset = "circle";
  cfg.method = Method::Cida;
  cfg.seed = 11;
  cfg.n_per_domain = 20;
  cfg.eval_n_per_domain = 20;
  cfg.iterations = 300;
  cfg.batch_source = 16;
  cfg.batch_target = 16;

  cfg.out_dir = (root / "det_a").string();
  run_experiment(cfg);
  cfg.out_dir = (root / "det_b").string();
  run_experiment(cfg);
  std::string why;
  if (!directories_identical(root / "det_a", root / "det_b", why)) {
    c.pass = false;
    c.detail = "rerun bundle differs: " + why;
    return c;
  }

  Checkpoint ck = load_checkpoint(root / "det_a" / "checkpoint.ckpt");
  save_checkpoint(ck, root / "det_roundtrip.ckpt");
  if (read_bytes(root / "det_a" / "checkpoint.ckpt") !=
      read_bytes(root / "det_roundtrip.ckpt")) {
    c.pass = false;
    c.detail = "checkpoint round-trip not bit-exact";
    return c;
  }

  Dataset ds = gen_circle(0, 20);
  ExperimentConfig zero = cfg;
  zero.method = Method::Cida;
  zero.lambda_d = 0.0;
  zero.iterations = 200;
  ExperimentConfig src_only = zero;
  src_only.method = Method::SourceOnly;
  auto a = train(zero, ds);
  auto b = train(src_only, ds);
  const std::int64_t ef = Checkpoint::manifest_count(a.checkpoint.e_sizes) +
                          Checkpoint::manifest_count(a.checkpoint.f_sizes);
  for (std::int64_t i = 0; i < ef; ++i)
    if (a.checkpoint.params[static_cast<std::size_t>(i)] !=
        b.checkpoint.params[static_cast<std::size_t>(i)]) {
      c.pass = false;
      c.detail = "lambda_d=0 trajectory diverges from source-only at parameter " +
                 std::to_string(i);
      return c;
    }
  c.detail = "rerun bundles byte-identical; checkpoint round-trip exact; lambda_d=0 matches "
             "source-only";
  return c;
}

}  // namespace

int main() {
  const fs::path root = fs::current_path() / "acceptance_runs";
  fs::create_directories(root);

  std::vector<Criterion> results(11);  // 1-based

  std::fprintf(stderr, "running oracle and gradient criteria...\n");
  results[1] = criterion_oracle_discriminators();
  results[2] = criterion_cida_bound();
  results[3] = criterion_pcida_bound();
  results[4] = criterion_predictor_and_full_game();
  results[5] = criterion_gradients();
  results[10] = criterion_determinism(root);

  std::fprintf(stderr, "running benchmark training (27 runs)...\n");
  std::vector<RunJob> jobs;
  for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
    for (Method m : {Method::SourceOnly, Method::Cida, Method::Pcida,
                     Method::CategoricalBaseline})
      jobs.push_back(RunJob{"circle", m, seed});
    for (Method m : {Method::SourceOnly, Method::Cida})
      jobs.push_back(RunJob{"sine", m, seed});
    for (Method m : {Method::SourceOnly, Method::Cida, Method::Pcida})
      jobs.push_back(RunJob{"circle2d", m, seed});
  }
  run_jobs(jobs, root);

  double max_run_s = 0.0;
  for (const auto& j : jobs) max_run_s = std::max(max_run_s, j.elapsed_s);

  {
    const double so = mean_target_accuracy(jobs, "circle", Method::SourceOnly);
    const double cida = mean_target_accuracy(jobs, "circle", Method::Cida);
    const double pcida = mean_target_accuracy(jobs, "circle", Method::Pcida);
    const double cat = mean_target_accuracy(jobs, "circle", Method::CategoricalBaseline);
    Criterion c;
    c.pass = so <= 0.75 && cida >= 0.90 && (cida - cat) >= 0.10 && pcida >= cida - 0.02 &&
             max_run_s < 900.0;
    c.detail = "source-only " + fmt(so) + " (<=0.75), cida " + fmt(cida) +
               " (>=0.90), categorical " + fmt(cat) + " (cida-cat>=0.10), pcida " +
               fmt(pcida) + " (>=cida-0.02), slowest run " + fmt(max_run_s) + " s (<900)";
    results[6] = c;
  }
  {
    const double so = mean_target_accuracy(jobs, "sine", Method::SourceOnly);
    const double cida = mean_target_accuracy(jobs, "sine", Method::Cida);
    Criterion c;
    c.pass = cida - so >= 0.10;
    c.detail = "cida " + fmt(cida) + " vs source-only " + fmt(so) + " (gain " +
               fmt(cida - so) + " >= 0.10)";
    results[7] = c;
  }
  {
    const double so = mean_target_accuracy(jobs, "circle2d", Method::SourceOnly);
    const double cida = mean_target_accuracy(jobs, "circle2d", Method::Cida);
    const double pcida = mean_target_accuracy(jobs, "circle2d", Method::Pcida);
    Criterion c;
    c.pass = cida - so >= 0.05 && pcida - so >= 0.05;
    c.detail = "source-only " + fmt(so) + ", cida " + fmt(cida) + ", pcida " + fmt(pcida) +
               " (each gain >= 0.05)";
    results[8] = c;
  }
  {
    Criterion c;
    c.pass = true;
    std::string parts;
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
      const auto& cida = find_job(jobs, "circle", Method::Cida, seed);
      const auto& so = find_job(jobs, "circle", Method::SourceOnly, seed);
      const double rc = cida.summary.probe.mean_r2, rs = so.summary.probe.mean_r2;
      if (!(rc < rs)) c.pass = false;
      parts += " seed" + std::to_string(seed) + " " + fmt(rc) + "<" + fmt(rs);
    }
    c.detail = "probe R2 cida vs source-only:" + parts;
    results[9] = c;
  }

  static const char* kNames[11] = {
      "",
      "criterion-1 optimal-discriminator brute-force suite",
      "criterion-2 mean-matching criterion bound and decomposition",
      "criterion-3 mean-variance criterion bound",
      "criterion-4 optimal predictor and full-game construction",
      "criterion-5 loss gradient suite",
      "criterion-6 circle benchmark",
      "criterion-7 sine benchmark",
      "criterion-8 two-dimensional index benchmark",
      "criterion-9 alignment probe ordering",
      "criterion-10 determinism and persistence",
  };
  bool all = true;
  for (int i = 1; i <= 10; ++i) {
    std::printf("%s %s: %s\n", results[i].pass ? "PASS" : "FAIL", kNames[i],
                results[i].detail.c_str());
    all = all && results[i].pass;
  }
  return all ? 0 : 1;
}
