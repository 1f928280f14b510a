#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cida/tensor.hpp"

namespace cida {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are owned here, one pair per
// parameter tensor; gradients are read from each tensor's grad buffer and
// parameters are updated in place.
class AdamState {
 public:
  AdamState() = default;

  AdamState(std::vector<Tensor*> params, AdamHyper hyper)
      : params_(std::move(params)), hyper_(hyper) {
    for (Tensor* p : params_) {
      if (!p->requires_grad) throw Error("adam: parameter does not require grad");
      m_.emplace_back(p->data.size(), 0.0);
      v_.emplace_back(p->data.size(), 0.0);
    }
  }

  std::int64_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = *params_[k];
      if (p.grad.size() != p.data.size())
        throw ShapeError("adam: grad/param size mismatch");
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double g = p.grad[i];
        if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient");
        m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g;
        v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.data[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
      }
    }
  }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamHyper hyper_;
  std::int64_t t_ = 0;
};

inline void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

// One optimizer step over freestanding params/state (convenience form).
inline void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  (void)params;
  state.step();
}

}  // namespace cida
