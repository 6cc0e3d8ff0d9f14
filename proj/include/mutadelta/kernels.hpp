#pragma once

#include <cmath>
#include <vector>

#include "mutadelta/tensor.hpp"

namespace mutadelta::numkit::kernels {

// C = A (r x k) * B (k x c).  ikj loop order keeps B and C row accesses
// contiguous, which is what matters on one core.
template <class T>
void matmul(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int64_t r = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw shape_error("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  if (c.rows() != r || c.cols() != n) throw shape_error("matmul: bad output shape");
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
  for (int64_t i = 0; i < r; ++i) {
    T* crow = cp + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t l = 0; l < k; ++l) {
      const T s = ap[i * k + l];
      if (s == T(0)) continue;
      const T* brow = bp + l * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

template <class T>
void matmul_accum(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int64_t r = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw shape_error("matmul_accum: inner dims");
  if (c.rows() != r || c.cols() != n) throw shape_error("matmul_accum: bad output shape");
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
  for (int64_t i = 0; i < r; ++i) {
    T* crow = cp + i * n;
    for (int64_t l = 0; l < k; ++l) {
      const T s = ap[i * k + l];
      if (s == T(0)) continue;
      const T* brow = bp + l * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

// A is (k x r) row-major; C (r x n) += A^T * B with B (k x n).
template <class T>
void matmul_tn_accum(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int64_t k = a.rows(), r = a.cols(), n = b.cols();
  if (b.rows() != k) throw shape_error("matmul_tn: inner dims");
  if (c.rows() != r || c.cols() != n) throw shape_error("matmul_tn: bad output shape");
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
  for (int64_t l = 0; l < k; ++l) {
    const T* arow = ap + l * r;
    const T* brow = bp + l * n;
    for (int64_t i = 0; i < r; ++i) {
      const T s = arow[i];
      if (s == T(0)) continue;
      T* crow = cp + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

// C = A (r x k) * B^T where B is (c x k): C_ij = dot(A_i, B_j).
template <class T>
void matmul_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int64_t r = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw shape_error("matmul_nt: inner dims " + a.shape_str() + " vs " + b.shape_str());
  if (c.rows() != r || c.cols() != n) throw shape_error("matmul_nt: bad output shape");
  const T* ap = a.data();
  const T* bp = b.data();
  T* cp = c.data();
  for (int64_t i = 0; i < r; ++i) {
    const T* arow = ap + i * k;
    T* crow = cp + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = bp + j * k;
      T acc = T(0);
      for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] = acc;
    }
  }
}

template <class T>
void matmul_nt_accum(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& c) {
  const int64_t r = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw shape_error("matmul_nt_accum: inner dims");
  if (c.rows() != r || c.cols() != n) throw shape_error("matmul_nt_accum: bad output shape");
  for (int64_t i = 0; i < r; ++i) {
    const T* arow = a.data() + i * k;
    T* crow = c.data() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc = T(0);
      for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

template <class T>
void softmax_row(const T* in, T* out, int64_t n) {
  T mx = in[0];
  for (int64_t j = 1; j < n; ++j)
    if (in[j] > mx) mx = in[j];
  T sum = T(0);
  for (int64_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  const T inv = T(1) / sum;
  for (int64_t j = 0; j < n; ++j) out[j] *= inv;
}

template <class T>
void softmax_rows(const Tensor<T>& in, Tensor<T>& out) {
  const int64_t r = in.rows(), n = in.cols();
  for (int64_t i = 0; i < r; ++i) softmax_row(in.data() + i * n, out.data() + i * n, n);
}

template <class T>
T log_sum_exp_row(const T* in, int64_t n) {
  T mx = in[0];
  for (int64_t j = 1; j < n; ++j)
    if (in[j] > mx) mx = in[j];
  T sum = T(0);
  for (int64_t j = 0; j < n; ++j) sum += std::exp(in[j] - mx);
  return mx + std::log(sum);
}

// out rows get (x - mean) * rstd * g + b; mean/rstd per row are stored into
// stats (r x 2) when given, for reuse in the backward pass.
template <class T>
void layer_norm_rows(const Tensor<T>& in, const Tensor<T>& g, const Tensor<T>& b,
                     Tensor<T>& out, Tensor<T>* stats, T eps) {
  const int64_t r = in.rows(), n = in.cols();
  for (int64_t i = 0; i < r; ++i) {
    const T* x = in.data() + i * n;
    T* y = out.data() + i * n;
    T mean = T(0);
    for (int64_t j = 0; j < n; ++j) mean += x[j];
    mean /= T(n);
    T var = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T d = x[j] - mean;
      var += d * d;
    }
    var /= T(n);
    const T rstd = T(1) / std::sqrt(var + eps);
    for (int64_t j = 0; j < n; ++j) y[j] = (x[j] - mean) * rstd * g[j] + b[j];
    if (stats) {
      (*stats)(i, 0) = mean;
      (*stats)(i, 1) = rstd;
    }
  }
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Numerically stable -[t*log(sigmoid(x)) + (1-t)*log(1-sigmoid(x))].
template <class T>
T bce_with_logits_scalar(T x, T t) {
  const T mx = x > T(0) ? x : T(0);
  return mx - x * t + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace mutadelta::numkit::kernels
