#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "mutadelta/errors.hpp"
#include "mutadelta/rng.hpp"

namespace mutadelta::numkit {

// Dense row-major tensor of rank 0, 1 or 2.  Rank 0 is a scalar, rank 1 a
// vector of length rows(), rank 2 a rows() x cols() matrix.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(T v) {
    Tensor t;
    t.rank_ = 0;
    t.r_ = 1;
    t.c_ = 1;
    t.v_.assign(1, v);
    return t;
  }

  static Tensor zeros(int64_t n) { return filled(n, T(0)); }
  static Tensor zeros(int64_t r, int64_t c) { return filled(r, c, T(0)); }

  static Tensor filled(int64_t n, T v) {
    check_dim(n);
    Tensor t;
    t.rank_ = 1;
    t.r_ = n;
    t.c_ = 1;
    t.v_.assign(static_cast<size_t>(n), v);
    return t;
  }

  static Tensor filled(int64_t r, int64_t c, T v) {
    check_dim(r);
    check_dim(c);
    Tensor t;
    t.rank_ = 2;
    t.r_ = r;
    t.c_ = c;
    t.v_.assign(static_cast<size_t>(r * c), v);
    return t;
  }

  static Tensor row(std::initializer_list<T> xs) {
    Tensor t = zeros(static_cast<int64_t>(xs.size()));
    int64_t i = 0;
    for (T x : xs) t[i++] = x;
    return t;
  }

  static Tensor matrix(int64_t r, int64_t c, std::initializer_list<T> xs) {
    if (static_cast<int64_t>(xs.size()) != r * c)
      throw shape_error("matrix: initializer size does not match r*c");
    Tensor t = zeros(r, c);
    int64_t i = 0;
    for (T x : xs) t.v_[static_cast<size_t>(i++)] = x;
    return t;
  }

  int rank() const { return rank_; }
  int64_t rows() const { return r_; }
  int64_t cols() const { return c_; }
  int64_t numel() const { return static_cast<int64_t>(v_.size()); }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && r_ == o.r_ && c_ == o.c_;
  }

  std::string shape_str() const {
    if (rank_ == 0) return "()";
    if (rank_ == 1) return "(" + std::to_string(r_) + ")";
    return "(" + std::to_string(r_) + "x" + std::to_string(c_) + ")";
  }

  T& operator()(int64_t i, int64_t j) { return v_[static_cast<size_t>(i * c_ + j)]; }
  T operator()(int64_t i, int64_t j) const { return v_[static_cast<size_t>(i * c_ + j)]; }
  T& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  T item() const {
    if (numel() != 1) throw shape_error("item: tensor is not a scalar");
    return v_[0];
  }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }

  void fill(T v) { v_.assign(v_.size(), v); }

  bool all_finite() const {
    for (T x : v_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  bool bitwise_equal(const Tensor& o) const {
    if (!same_shape(o)) return false;
    for (size_t i = 0; i < v_.size(); ++i)
      if (v_[i] != o.v_[i]) return false;
    return true;
  }

  T max_abs_diff(const Tensor& o) const {
    if (!same_shape(o)) throw shape_error("max_abs_diff: shape mismatch");
    T m = 0;
    for (size_t i = 0; i < v_.size(); ++i) {
      T d = std::abs(v_[i] - o.v_[i]);
      if (d > m) m = d;
    }
    return m;
  }

  const std::vector<T>& storage() const { return v_; }
  std::vector<T>& storage() { return v_; }

 private:
  static void check_dim(int64_t n) {
    if (n < 0) throw shape_error("tensor dimension must be non-negative");
  }

  int rank_ = 0;
  int64_t r_ = 0;
  int64_t c_ = 0;
  std::vector<T> v_;
};

template <class T>
Tensor<T> init_uniform_fan_in(Rng& rng, int64_t r, int64_t c, int64_t fan_in) {
  if (fan_in <= 0) throw contract_error("init_uniform_fan_in: fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<T> t = Tensor<T>::zeros(r, c);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <class T>
Tensor<T> init_normal(Rng& rng, int64_t r, int64_t c, double sd) {
  Tensor<T> t = Tensor<T>::zeros(r, c);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(0.0, sd));
  return t;
}

}  // namespace mutadelta::numkit
