#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cida/adam.hpp"
#include "cida/checkpoint.hpp"
#include "cida/config.hpp"
#include "cida/dataset.hpp"
#include "cida/losses.hpp"
#include "cida/models.hpp"

namespace cida {

enum class SplitSel { Source, Target, Both };

// n samples drawn uniformly with replacement from the selected split(s);
// deterministic in the rng state.
inline std::vector<Sample> sample_batch(const Dataset& ds, SplitSel sel, std::int64_t n,
                                        Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    Split s = ds.samples[i].split;
    if (sel == SplitSel::Both || (sel == SplitSel::Source && s == Split::Source) ||
        (sel == SplitSel::Target && s == Split::Target))
      pool.push_back(i);
  }
  if (pool.empty()) throw DataError("sample_batch: empty split");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out.push_back(ds.samples[pool[rng.uniform_int(pool.size())]]);
  return out;
}

// Training-visible view of a batch. Labels are only materialized for pure
// source batches; target rows never expose their held-out labels here.
struct Batch {
  Tensor x;       // [n, d_x]
  Tensor u_raw;   // [n, d_u]
  Tensor u_norm;  // [n, d_u]
  std::vector<std::int64_t> labels;  // present iff with_labels
  std::vector<Split> splits;
};

inline Batch make_batch(const std::vector<Sample>& samples, const Dataset& ds,
                        const IndexNormalization& norm, bool with_labels) {
  const std::int64_t n = static_cast<std::int64_t>(samples.size());
  Batch b;
  b.x = Tensor(Shape{n, ds.d_x});
  b.u_raw = Tensor(Shape{n, ds.d_u});
  b.u_norm = Tensor(Shape{n, ds.d_u});
  for (std::int64_t i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < ds.d_x; ++j) b.x.at(i, j) = s.x[static_cast<std::size_t>(j)];
    auto un = norm.apply(s.u);
    for (std::int64_t j = 0; j < ds.d_u; ++j) {
      b.u_raw.at(i, j) = s.u[static_cast<std::size_t>(j)];
      b.u_norm.at(i, j) = un[static_cast<std::size_t>(j)];
    }
    b.splits.push_back(s.split);
    if (with_labels) {
      if (s.split != Split::Source)
        throw DataError("make_batch: labels requested for a non-source sample");
      if (!s.y) throw DataError("make_batch: source sample without label");
      b.labels.push_back(*s.y);
    }
  }
  return b;
}

struct StepLog {
  double v_p = 0.0;
  std::optional<double> v_d;
  double encoder_objective = 0.0;
};

struct HistoryRow {
  std::int64_t iteration;
  double v_p;
  std::optional<double> v_d;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<HistoryRow> history;
};

// Alternating minimax trainer. Step A updates the discriminator on a
// source+target batch with the encoder frozen; step B updates encoder and
// predictor with the discriminator frozen. The same both-split batch serves
// both steps of one iteration; source-only skips step A and the domain term
// entirely.
//
// The encoder's adversarial term is realized in non-saturating form: instead
// of ascending V_d directly (whose gradient scales with D's residuals and
// dies as soon as D fits well), the encoder descends the same domain loss
// evaluated against batch-shuffled indices. Under an optimal discriminator
// both forms share their optimum - D's conditional collapses onto the
// marginal - but the shuffled form keeps a usable gradient throughout
// training. The discriminator regresses raw index values; encoders always
// consume normalized ones.
class Trainer {
 public:
  Trainer(ExperimentConfig cfg, const Dataset& data)
      : cfg_(std::move(cfg)),
        data_(data),
        batch_rng_(mix_seed(cfg_.seed, 0)),
        shuffle_rng_(mix_seed(cfg_.seed, 4)) {
    cfg_.validate();
    if (data_.count(Split::Source) == 0) throw DataError("train: dataset has no source split");
    if (cfg_.method != Method::SourceOnly && data_.count(Split::Target) == 0)
      throw DataError("train: method needs a target split");

    norm_ = cfg_.u_min.empty() ? normalize_index(data_)
                               : IndexNormalization{cfg_.u_min, cfg_.u_max};
    if (static_cast<std::int64_t>(norm_.dims()) != data_.d_u)
      throw DataError("train: normalization dimension mismatch");

    encoder_ = EncoderE::make(data_.d_x, data_.d_u, cfg_.d_z, {100, 100}, Activation::Relu,
                              mix_seed(cfg_.seed, 1));
    predictor_ = PredictorF::make(cfg_.d_z, data_.n_classes, {100}, Activation::Relu,
                                  mix_seed(cfg_.seed, 2));
    discriminator_ = DiscriminatorD::make(disc_kind(), cfg_.d_z, data_.d_u, {100, 100},
                                          Activation::Relu, mix_seed(cfg_.seed, 3),
                                          cfg_.gmm_k, cfg_.bins, cfg_.var_floor);

    std::vector<Tensor*> ef = encoder_.net.params();
    for (Tensor* p : predictor_.net.params()) ef.push_back(p);
    adam_ef_ = AdamState(ef, AdamHyper{cfg_.lr});
    adam_d_ = AdamState(discriminator_.net.params(), AdamHyper{cfg_.lr});

    if (cfg_.method == Method::CategoricalBaseline) compute_bin_edges();
  }

  DiscKind disc_kind() const {
    switch (cfg_.method) {
      case Method::Pcida: return DiscKind::Gaussian;
      case Method::PcidaGmm: return DiscKind::Gmm;
      case Method::CategoricalBaseline: return DiscKind::Categorical;
      default: return DiscKind::Point;
    }
  }

  // One alternating iteration on the given batches. Returns V_p and the
  // post-discriminator-step V_d, both from the step-B forward pass.
  StepLog iterate(const Batch& batch_src, const Batch& batch_both) {
    // Step A: discriminator descends its own loss, encoder frozen.
    if (cfg_.method != Method::SourceOnly) {
      Tape tape;
      Var z = encoder_.encode(tape, tape.input(batch_both.x), tape.input(batch_both.u_norm),
                              /*frozen=*/true);
      DiscOutput head = discriminator_.forward_impl(tape, z, /*frozen=*/false);
      Var v_d = head_loss(tape, head, batch_both, /*shuffled=*/false);
      zero_grads(discriminator_.net.params());
      tape.backward(v_d);
      adam_d_.step();
    }

    // Step B: encoder + predictor descend V_p + lambda_d * (confusion form
    // of -V_d), D frozen.
    StepLog log;
    {
      Tape tape;
      Var z_src = encoder_.encode(tape, tape.input(batch_src.x), tape.input(batch_src.u_norm));
      Var logits = predictor_.logits(tape, z_src);
      Var v_p = losses::prediction_loss(tape, logits, batch_src.labels);
      Var objective = v_p;
      if (cfg_.method != Method::SourceOnly) {
        Var z_both = encoder_.encode(tape, tape.input(batch_both.x),
                                     tape.input(batch_both.u_norm));
        DiscOutput head = discriminator_.forward_impl(tape, z_both, /*frozen=*/true);
        Var v_d = head_loss(tape, head, batch_both, /*shuffled=*/false);
        Var confusion = head_loss(tape, head, batch_both, /*shuffled=*/true);
        objective = ops::add(v_p, ops::scale(confusion, cfg_.lambda_d));
        log.v_d = v_d.scalar();
      }
      log.v_p = v_p.scalar();
      log.encoder_objective =
          log.v_d ? value_terms(log.v_p, *log.v_d, cfg_.lambda_d).encoder_objective()
                  : log.v_p;
      std::vector<Tensor*> ef = encoder_.net.params();
      for (Tensor* p : predictor_.net.params()) ef.push_back(p);
      zero_grads(ef);
      tape.backward(objective);
      adam_ef_.step();
    }
    return log;
  }

  TrainResult run() {
    std::vector<HistoryRow> history;
    StepLog last;
    for (std::int64_t it = 1; it <= cfg_.iterations; ++it) {
      auto src_samples = sample_batch(data_, SplitSel::Source, cfg_.batch_source, batch_rng_);
      auto both_samples = sample_batch(data_, SplitSel::Both,
                                       cfg_.batch_source + cfg_.batch_target, batch_rng_);
      Batch src = make_batch(src_samples, data_, norm_, /*with_labels=*/true);
      Batch both = make_batch(both_samples, data_, norm_, /*with_labels=*/false);
      try {
        last = iterate(src, both);
      } catch (const NumericError& e) {
        throw NumericError("train aborted at iteration " + std::to_string(it) + ": " +
                           e.what());
      }
      if (it % 100 == 0) history.push_back({it, last.v_p, last.v_d});
    }
    TrainResult result{make_checkpoint(), std::move(history)};
    result.checkpoint.final_v_p = last.v_p;
    result.checkpoint.final_v_d = last.v_d;
    return result;
  }

  Checkpoint make_checkpoint() const {
    Checkpoint ckpt;
    ckpt.method = cfg_.method;
    ckpt.e_sizes = encoder_.net.sizes;
    ckpt.f_sizes = predictor_.net.sizes;
    ckpt.d_sizes = discriminator_.net.sizes;
    ckpt.lambda_d = cfg_.lambda_d;
    ckpt.lr = cfg_.lr;
    ckpt.seed = cfg_.seed;
    ckpt.d_z = cfg_.d_z;
    ckpt.var_floor = cfg_.var_floor;
    ckpt.norm = norm_;
    encoder_.net.append_flat(ckpt.params);
    predictor_.net.append_flat(ckpt.params);
    discriminator_.net.append_flat(ckpt.params);
    return ckpt;
  }

  EncoderE& encoder() { return encoder_; }
  PredictorF& predictor() { return predictor_; }
  DiscriminatorD& discriminator() { return discriminator_; }
  const IndexNormalization& norm() const { return norm_; }
  const ExperimentConfig& config() const { return cfg_; }

  // Domain bin of one row for the categorical baseline: source rows form one
  // bin; target rows fall into equal-mass quantile bins of their first index
  // dimension.
  std::int64_t bin_of(Split split, double u_first) const {
    if (split == Split::Source) return 0;
    std::int64_t b = 1;
    for (double edge : bin_edges_) {
      if (u_first < edge) break;
      ++b;
    }
    return std::min<std::int64_t>(b, cfg_.bins - 1);
  }

 private:
  void compute_bin_edges() {
    std::vector<double> target_u;
    for (const Sample& s : data_.samples)
      if (s.split == Split::Target) target_u.push_back(s.u[0]);
    std::sort(target_u.begin(), target_u.end());
    const std::int64_t target_bins = cfg_.bins - 1;
    for (std::int64_t q = 1; q < target_bins; ++q) {
      std::size_t pos = static_cast<std::size_t>(q) * target_u.size() /
                        static_cast<std::size_t>(target_bins);
      bin_edges_.push_back(target_u[std::min(pos, target_u.size() - 1)]);
    }
  }

  // Domain loss of a head against the batch's raw indices. shuffled = true
  // re-pairs rows with a random permutation of the batch indices (the
  // encoder's confusion target).
  Var head_loss(Tape& tape, const DiscOutput& head, const Batch& batch, bool shuffled) {
    Tensor u = batch.u_raw;
    std::vector<std::int64_t> perm(static_cast<std::size_t>(u.shape[0]));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<std::int64_t>(i);
    if (shuffled) {
      for (std::int64_t i = u.shape[0] - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(
            shuffle_rng_.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      }
      Tensor orig = u;
      for (std::int64_t i = 0; i < u.shape[0]; ++i)
        for (std::int64_t j = 0; j < u.shape[1]; ++j)
          u.at(i, j) = orig.at(perm[static_cast<std::size_t>(i)], j);
    }
    switch (discriminator_.kind) {
      case DiscKind::Point:
        return losses::l2_domain_loss(tape, head.point, tape.input(std::move(u)));
      case DiscKind::Gaussian:
        return losses::gaussian_nll_loss(tape, head.mu, head.var, tape.input(std::move(u)));
      case DiscKind::Gmm:
        return losses::gmm_nll_loss(tape, head.pi, head.mu, head.var,
                                    tape.input(std::move(u)));
      case DiscKind::Categorical: {
        std::vector<std::int64_t> bins;
        for (std::size_t i = 0; i < batch.splits.size(); ++i) {
          const std::size_t row = static_cast<std::size_t>(perm[i]);
          bins.push_back(
              bin_of(batch.splits[row], batch.u_raw.at(static_cast<std::int64_t>(row), 0)));
        }
        return losses::categorical_domain_loss(tape, head.bin_logits, bins);
      }
    }
    throw Error("head_loss: bad kind");
  }

  ExperimentConfig cfg_;
  const Dataset& data_;
  IndexNormalization norm_;
  EncoderE encoder_;
  PredictorF predictor_;
  DiscriminatorD discriminator_;
  AdamState adam_ef_, adam_d_;
  Rng batch_rng_;
  Rng shuffle_rng_;  // separate stream so batch draws align across methods
  std::vector<double> bin_edges_;
};

inline TrainResult train(const ExperimentConfig& cfg, const Dataset& data) {
  Trainer trainer(cfg, data);
  return trainer.run();
}

}  // namespace cida
