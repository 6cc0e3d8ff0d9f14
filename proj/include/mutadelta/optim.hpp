#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mutadelta/params.hpp"

namespace mutadelta::numkit {

struct Schedule {
  double peak_lr = 1e-4;
  double floor_lr = 1e-5;
  int64_t warmup_steps = 1000;
  int64_t total_steps = 10000;

  void validate() const {
    if (!(floor_lr > 0.0) || !(peak_lr >= floor_lr))
      throw contract_error("schedule: need 0 < floor_lr <= peak_lr");
    if (!(warmup_steps > 0) || !(warmup_steps < total_steps))
      throw contract_error("schedule: need 0 < warmup_steps < total_steps");
  }
};

// Linear warmup from 0 to peak over warmup_steps, then cosine decay to the
// floor at total_steps; clamps to the floor afterwards.
inline double lr_at(const Schedule& s, int64_t step) {
  s.validate();
  if (step < 0) throw contract_error("lr_at: negative step");
  if (step <= s.warmup_steps)
    return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  if (step >= s.total_steps) return s.floor_lr;
  const double prog = static_cast<double>(step - s.warmup_steps) /
                      static_cast<double>(s.total_steps - s.warmup_steps);
  return s.floor_lr +
         0.5 * (s.peak_lr - s.floor_lr) * (1.0 + std::cos(3.14159265358979323846 * prog));
}

// AdamW with decoupled weight decay.  Moment tensors are addressed by the
// parameter's position in the ParamSet, which has stable insertion order.
template <class T>
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.01)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void step(ParamSet<T>& params, double lr) {
    ensure_state(params);
    t_ += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(beta1_, static_cast<double>(t_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(beta2_, static_cast<double>(t_)));
    size_t k = 0;
    for (auto& p : params) {
      Tensor<T>& m = m_[k];
      Tensor<T>& v = v_[k];
      ++k;
      for (int64_t i = 0; i < p.value.numel(); ++i) {
        const T g = p.grad[i];
        if (!std::isfinite(static_cast<double>(g)))
          throw numeric_error("adamw: non-finite gradient in " + p.name);
        m[i] = static_cast<T>(beta1_) * m[i] + (T(1) - static_cast<T>(beta1_)) * g;
        v[i] = static_cast<T>(beta2_) * v[i] + (T(1) - static_cast<T>(beta2_)) * g * g;
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p.value[i] -= static_cast<T>(lr) * (mhat / (std::sqrt(vhat) + static_cast<T>(eps_)) +
                                            static_cast<T>(weight_decay_) * p.value[i]);
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  // State access for checkpointing; valid after the first step or after
  // ensure_state.
  void ensure_state(const ParamSet<T>& params) {
    if (m_.size() == params.size()) return;
    if (!m_.empty()) throw contract_error("adamw: parameter set changed under the optimizer");
    for (const auto& p : params) {
      Tensor<T> z = p.value;
      z.fill(T(0));
      m_.push_back(z);
      v_.push_back(std::move(z));
    }
  }

  std::vector<Tensor<T>>& m_state() { return m_; }
  std::vector<Tensor<T>>& v_state() { return v_; }

  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace mutadelta::numkit
