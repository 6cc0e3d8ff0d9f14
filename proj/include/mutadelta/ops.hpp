#pragma once

#include <cmath>
#include <vector>

#include "mutadelta/graph.hpp"
#include "mutadelta/kernels.hpp"

namespace mutadelta::numkit {

// Plain softmax over a vector; validates the numeric domain.
template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  if (logits.empty()) throw shape_error("softmax: empty input");
  for (T x : logits)
    if (!std::isfinite(static_cast<double>(x))) throw numeric_error("softmax: non-finite logit");
  std::vector<T> out(logits.size());
  Tensor<T> tmp_in = Tensor<T>::zeros(static_cast<int64_t>(logits.size()));
  for (size_t i = 0; i < logits.size(); ++i) tmp_in[static_cast<int64_t>(i)] = logits[i];
  Tensor<T> tmp_out = tmp_in;
  kernels::softmax_row(tmp_in.data(), tmp_out.data(), tmp_in.numel());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = tmp_out[static_cast<int64_t>(i)];
  return out;
}

template <class T>
T cross_entropy(const std::vector<T>& logits, int target) {
  if (logits.empty()) throw shape_error("cross_entropy: empty logits");
  if (target < 0 || target >= static_cast<int>(logits.size()))
    throw index_error("cross_entropy: target " + std::to_string(target) + " outside " +
                      std::to_string(logits.size()) + " classes");
  for (T x : logits)
    if (!std::isfinite(static_cast<double>(x)))
      throw numeric_error("cross_entropy: non-finite logit");
  Tensor<T> row = Tensor<T>::zeros(static_cast<int64_t>(logits.size()));
  for (size_t i = 0; i < logits.size(); ++i) row[static_cast<int64_t>(i)] = logits[i];
  return kernels::log_sum_exp_row(row.data(), row.numel()) - logits[static_cast<size_t>(target)];
}

// Projection weights of one cross-attention block.  d_k is the shared
// query/key width; the value projection sets the output width.
template <class T>
struct AttnWeights {
  Value<T> wq, bq, wk, bk, wv, bv;
};

// Softmax(Q W_q (K W_k)^T / sqrt(d_k)) (V W_v), with bias terms on all three
// projections.  Queries attend over all key rows; no masking.
template <class T>
Value<T> cross_attention(Graph<T>& g, Value<T> queries, Value<T> keys, Value<T> values,
                         const AttnWeights<T>& w) {
  Value<T> qh = g.add_rowvec(g.matmul(queries, w.wq), w.bq);
  Value<T> kh = g.add_rowvec(g.matmul(keys, w.wk), w.bk);
  Value<T> vh = g.add_rowvec(g.matmul(values, w.wv), w.bv);
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(qh.val().cols()));
  Value<T> scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dk);
  return g.matmul(g.softmax_rows(scores), vh);
}

// Raw-tensor twin of cross_attention for the no-tape inference path.
template <class T>
Tensor<T> cross_attention_raw(const Tensor<T>& queries, const Tensor<T>& keys,
                              const Tensor<T>& values, const Tensor<T>& wq, const Tensor<T>& bq,
                              const Tensor<T>& wk, const Tensor<T>& bk, const Tensor<T>& wv,
                              const Tensor<T>& bv) {
  auto project = [](const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Tensor<T> y = Tensor<T>::zeros(x.rows(), w.cols());
    kernels::matmul(x, w, y);
    for (int64_t i = 0; i < y.rows(); ++i)
      for (int64_t j = 0; j < y.cols(); ++j) y(i, j) += b[j];
    return y;
  };
  Tensor<T> qh = project(queries, wq, bq);
  Tensor<T> kh = project(keys, wk, bk);
  Tensor<T> vh = project(values, wv, bv);
  Tensor<T> scores = Tensor<T>::zeros(qh.rows(), kh.rows());
  kernels::matmul_nt(qh, kh, scores);
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(qh.cols()));
  for (int64_t i = 0; i < scores.numel(); ++i) scores[i] *= inv_sqrt_dk;
  Tensor<T> attn = scores;
  kernels::softmax_rows(scores, attn);
  Tensor<T> out = Tensor<T>::zeros(qh.rows(), vh.cols());
  kernels::matmul(attn, vh, out);
  return out;
}

}  // namespace mutadelta::numkit
