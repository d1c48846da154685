// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/rng.hpp"

namespace dasp {

/// Dense row-major n-dimensional array of doubles. The universal value type
/// for signals, features, parameters and gradients.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {
    check_shape(shape_);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != count(shape_))
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " + shape_str());
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vector(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  static Tensor randn(std::vector<std::size_t> shape, Rng& rng,
                      double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = stddev * rng.gaussian();
    return t;
  }

  static Tensor rand_uniform(std::vector<std::size_t> shape, Rng& rng,
                             double lo = 0.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rows() const { return extent(0); }
  std::size_t cols() const { return extent(1); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }

  double item() const {
    if (size() != 1)
      throw std::invalid_argument("Tensor::item on non-scalar " + shape_str());
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i)
      os << shape_[i] << (i + 1 < shape_.size() ? "," : "");
    os << ')';
    return os.str();
  }

  Tensor reshape(std::vector<std::size_t> shape) const {
    if (count(shape) != size())
      throw std::invalid_argument("reshape: " + shape_str() +
                                  " incompatible with requested shape");
    return Tensor(std::move(shape), data_);
  }

  Tensor transpose() const {
    if (ndim() != 2) throw std::invalid_argument("transpose needs 2-D tensor");
    Tensor out({shape_[1], shape_[0]});
    for (std::size_t i = 0; i < shape_[0]; ++i)
      for (std::size_t j = 0; j < shape_[1]; ++j)
        out.data_[j * shape_[0] + i] = data_[i * shape_[1] + j];
    return out;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

  friend Tensor hadamard(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "hadamard");
    Tensor out(a.shape_);
    for (std::size_t i = 0; i < out.size(); ++i)
      out.data_[i] = a.data_[i] * b.data_[i];
    return out;
  }

  double sum() const {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
  }
  double mean() const { return size() ? sum() / double(size()) : 0.0; }
  double max_value() const {
    return *std::max_element(data_.begin(), data_.end());
  }
  double norm2_sq() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double norm2() const { return std::sqrt(norm2_sq()); }

  Tensor map(const std::function<double(double)>& f) const {
    Tensor out(shape_);
    for (std::size_t i = 0; i < size(); ++i) out.data_[i] = f(data_[i]);
    return out;
  }

  void require_same_shape(const Tensor& o, const char* op) const {
    if (!same_shape(o))
      throw std::invalid_argument(std::string("shape mismatch in ") + op +
                                  ": " + shape_str() + " vs " + o.shape_str());
  }

  void require_finite(const char* op) const {
    if (!all_finite())
      throw std::invalid_argument(std::string("nonfinite values in ") + op);
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return shape.empty() ? 0 : n;
  }

 private:
  static void check_shape(const std::vector<std::size_t>& shape) {
    for (std::size_t e : shape)
      if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape");
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// C = A * B for 2-D tensors, (m x k) * (k x n). ikj loop order keeps the
/// inner stride 1 on both B and C.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    throw std::invalid_argument("matmul: incompatible shapes " +
                                a.shape_str() + " x " + b.shape_str());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

/// Dense inverse by Gauss-Jordan with partial pivoting; intended for the
/// small symmetric systems in loss/transform code.
inline Tensor matrix_inverse(const Tensor& a) {
  if (a.ndim() != 2 || a.rows() != a.cols())
    throw std::invalid_argument("matrix_inverse: need square matrix, got " +
                                a.shape_str());
  const std::size_t n = a.rows();
  Tensor work = a;
  Tensor inv = Tensor::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work.at(r, col)) > std::abs(work.at(pivot, col))) pivot = r;
    if (std::abs(work.at(pivot, col)) < 1e-300)
      throw std::runtime_error("matrix_inverse: singular matrix");
    if (pivot != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work.at(pivot, j), work.at(col, j));
        std::swap(inv.at(pivot, j), inv.at(col, j));
      }
    const double d = work.at(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work.at(col, j) /= d;
      inv.at(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work.at(r, j) -= f * work.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

inline double dot(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace dasp
