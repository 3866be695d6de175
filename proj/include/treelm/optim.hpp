#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "treelm/error.hpp"

namespace treelm {

struct OptimConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 0;
  int total_steps = 0;  // linear decay target; 0 disables decay
  int batch_size = 24;
  uint64_t shuffle_seed = 0;
};

// Adam with a linear warmup / linear decay schedule over flat buffers.
// The buffer list must be identical (same order, same sizes) on every step.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const OptimConfig& cfg) : cfg_(cfg) {}

  double lr_at(int64_t step) const {
    double lr = cfg_.lr;
    if (cfg_.warmup_steps > 0 && step <= cfg_.warmup_steps)
      return lr * static_cast<double>(step) / cfg_.warmup_steps;
    if (cfg_.total_steps > cfg_.warmup_steps && step <= cfg_.total_steps) {
      const double remain = static_cast<double>(cfg_.total_steps - step);
      const double span = static_cast<double>(cfg_.total_steps - cfg_.warmup_steps);
      return lr * remain / span;
    }
    return cfg_.total_steps > 0 ? 0.0 : lr;
  }

  void step(const std::vector<std::vector<T>*>& params, const std::vector<std::vector<T>*>& grads) {
    if (params.size() != grads.size()) throw Error::config_invalid("params/grads mismatch");
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t t = 0; t < params.size(); ++t) {
        m_[t].assign(params[t]->size(), T(0));
        v_[t].assign(params[t]->size(), T(0));
      }
    }
    ++step_;
    const double lr = lr_at(step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t t = 0; t < params.size(); ++t) {
      std::vector<T>& p = *params[t];
      const std::vector<T>& g = *grads[t];
      std::vector<T>& m = m_[t];
      std::vector<T>& v = v_[t];
      for (size_t i = 0; i < p.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  int64_t steps_taken() const { return step_; }

 private:
  OptimConfig cfg_;
  int64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace treelm
