#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcreg/errors.hpp"

namespace gcreg {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape &s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_size(const Shape &s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles. Rank 1 and rank 2 are the only ranks the
/// rest of the library uses, but nothing here forbids higher ranks.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (shape_size(shape_) != data_.size())
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
  }

  static Tensor vector(std::initializer_list<double> v) {
    return Tensor({v.size()}, std::vector<double>(v));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> d;
    d.reserve(m * n);
    for (const auto &r : rows) {
      if (r.size() != n) throw DimensionError("ragged matrix literal");
      d.insert(d.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(d));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return rank() >= 2 ? shape_[1] : 1; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double> &values() const { return data_; }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double &operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols(), cols()};
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor &, const Tensor &) = default;

private:
  void check_extents() const {
    for (auto e : shape_)
      if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {
inline void require_matrix(const Tensor &t, const char *op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}
} // namespace detail

/// a[m x k] * b[k x n]. Each output entry accumulates over k in increasing order.
inline Tensor matmul(const Tensor &a, const Tensor &b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  Tensor c({m, n});
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double *ci = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = pa[i * k + p];
      const double *bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

inline Tensor transpose(const Tensor &a) {
  detail::require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b^T, same summation order as matmul.
inline Tensor matmul_nt(const Tensor &a, const Tensor &b) { return matmul(a, transpose(b)); }

/// a^T * b, same summation order as matmul.
inline Tensor matmul_tn(const Tensor &a, const Tensor &b) {
  detail::require_matrix(a, "matmul_tn");
  detail::require_matrix(b, "matmul_tn");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul_tn: inner extents differ " + shape_str(a.shape()) + "^T x " +
                         shape_str(b.shape()));
  Tensor c({m, n});
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double *ci = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double api = pa[p * m + i];
      const double *bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

template <class F>
Tensor ew_map(F &&f, const Tensor &t) {
  Tensor out = t;
  for (auto &v : out.data()) v = f(v);
  return out;
}

template <class F>
Tensor ew_zip(F &&f, const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw DimensionError("ew_zip: shapes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = f(od[i], bd[i]);
  return out;
}

/// Heaviside step with H(0) = 0.
inline double heaviside(double x) { return x > 0.0 ? 1.0 : 0.0; }

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

enum class ReduceKind { sum, mean, abs_mean, count_nonzero };

/// Left-to-right reduction over the flat data.
inline double reduce(ReduceKind kind, std::span<const double> v) {
  switch (kind) {
  case ReduceKind::sum: {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  case ReduceKind::mean: {
    if (v.empty()) throw DomainError("mean of an empty tensor");
    return reduce(ReduceKind::sum, v) / static_cast<double>(v.size());
  }
  case ReduceKind::abs_mean: {
    if (v.empty()) throw DomainError("abs_mean of an empty tensor");
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s / static_cast<double>(v.size());
  }
  case ReduceKind::count_nonzero: {
    std::size_t c = 0;
    for (double x : v) c += (x != 0.0);
    return static_cast<double>(c);
  }
  }
  return 0.0;
}

inline double reduce(ReduceKind kind, const Tensor &t) { return reduce(kind, t.data()); }

} // namespace gcreg
