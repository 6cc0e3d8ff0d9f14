#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "mutadelta/graph.hpp"
#include "mutadelta/rng.hpp"

namespace mutadelta::numkit {

template <class T>
struct GradCheckReport {
  T max_rel_err = T(0);
  std::string worst_param;
  int64_t worst_index = -1;
  T worst_analytic = T(0);
  T worst_numeric = T(0);
  int64_t coords_checked = 0;
};

// Central-difference check of a scalar graph fragment against the tape
// gradients.  Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8);
// the report carries the max over sampled coordinates.  The builder must
// reconstruct the same forward computation on every call.
template <class T>
GradCheckReport<T> grad_check(
    const std::function<Value<T>(Graph<T>&, ParamSet<T>&)>& build, ParamSet<T>& params,
    T eps = T(1e-5), int samples_per_param = 4, uint64_t seed = 2024) {
  if (!(eps > T(0))) throw contract_error("grad_check: eps must be positive");
  params.zero_grads();
  {
    Graph<T> g;
    Value<T> loss = build(g, params);
    if (loss.val().numel() != 1) throw contract_error("grad_check: fragment must be scalar");
    g.backward(loss);
  }
  std::vector<Tensor<T>> analytic;
  for (auto& p : params) analytic.push_back(p.grad);

  auto eval = [&]() -> T {
    Graph<T> g;
    return build(g, params).val().item();
  };

  GradCheckReport<T> rep;
  Rng rng = Rng::seeded(seed);
  size_t pi = 0;
  for (auto& p : params) {
    const int64_t n = p.value.numel();
    std::vector<int64_t> coords;
    if (n <= samples_per_param) {
      for (int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int s = 0; s < samples_per_param; ++s)
        coords.push_back(static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n))));
    }
    for (int64_t i : coords) {
      const T saved = p.value[i];
      p.value[i] = saved + eps;
      const T fp = eval();
      p.value[i] = saved - eps;
      const T fm = eval();
      p.value[i] = saved;
      const T numeric = (fp - fm) / (T(2) * eps);
      const T a = analytic[pi][i];
      const T denom = std::max({std::abs(a), std::abs(numeric), T(1e-8)});
      const T rel = std::abs(a - numeric) / denom;
      rep.coords_checked += 1;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
    ++pi;
  }
  params.zero_grads();
  return rep;
}

}  // namespace mutadelta::numkit
