#pragma once

// Dense N-order tensors and the multilinear primitives built on them.
//
// Storage is row-major (last index fastest). Modes are 0-based. Matricization
// follows the Kolda-Bader column ordering: the remaining modes vary with the
// lowest mode fastest, so that for Y = X x_0 A_0 ... x_{N-1} A_{N-1}
//
//   Y_(n) = A_n X_(n) (A_{N-1} (x) ... (x) A_{n+1} (x) A_{n-1} (x) ... (x) A_0)^T.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tclust/errors.hpp"

namespace tclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

inline std::string to_string(const Shape &shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

class DenseTensor {
public:
  /// A single zero element of shape (1).
  DenseTensor() : shape_{1}, data_(1, 0.0) {}

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), 0.0);
  }

  DenseTensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      throw DimensionError("tensor data length " +
                           std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
  }

  std::size_t order() const { return shape_.size(); }
  const Shape &shape() const { return shape_; }
  std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double &operator[](std::size_t linear) { return data_[linear]; }
  double operator[](std::size_t linear) const { return data_[linear]; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size())
      throw InvalidModeError("index arity does not match tensor order");
    std::size_t lin = 0;
    for (std::size_t m = 0; m < shape_.size(); ++m) {
      if (idx[m] >= shape_[m])
        throw DimensionError("tensor index out of range");
      lin = lin * shape_[m] + idx[m];
    }
    return lin;
  }

  template <class... I> double &operator()(I... idx) {
    const std::size_t a[] = {static_cast<std::size_t>(idx)...};
    return data_[linear_index(a)];
  }
  template <class... I> double operator()(I... idx) const {
    const std::size_t a[] = {static_cast<std::size_t>(idx)...};
    return data_[linear_index(a)];
  }

  friend bool operator==(const DenseTensor &, const DenseTensor &) = default;

private:
  void validate_shape() const {
    if (shape_.empty())
      throw DimensionError("tensor order must be at least 1");
    for (auto d : shape_)
      if (d == 0)
        throw DimensionError("tensor extents must be positive, got " +
                             to_string(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

namespace detail {

inline void check_mode(const DenseTensor &x, std::size_t mode) {
  if (mode >= x.order())
    throw InvalidModeError("mode " + std::to_string(mode) +
                           " out of range for order-" +
                           std::to_string(x.order()) + " tensor");
}

// Extents before and after `mode`, for viewing x as (left, I_mode, right).
inline std::pair<std::size_t, std::size_t> split_extents(const Shape &shape,
                                                         std::size_t mode) {
  std::size_t left = 1, right = 1;
  for (std::size_t m = 0; m < mode; ++m)
    left *= shape[m];
  for (std::size_t m = mode + 1; m < shape.size(); ++m)
    right *= shape[m];
  return {left, right};
}

} // namespace detail

/// X x_mode U, with U of size J x I_mode; the result has I_mode replaced by J.
inline DenseTensor mode_n_product(const DenseTensor &x, const Matrix &u,
                                  std::size_t mode) {
  detail::check_mode(x, mode);
  const std::size_t in = x.dim(mode);
  if (static_cast<std::size_t>(u.cols()) != in)
    throw DimensionError("mode-" + std::to_string(mode) + " product: matrix " +
                         detail::shape_str(u.rows(), u.cols()) +
                         " incompatible with extent " + std::to_string(in));
  if (u.rows() == 0)
    throw DimensionError("mode product with an empty matrix");

  const auto [left, right] = detail::split_extents(x.shape(), mode);
  const std::size_t out = static_cast<std::size_t>(u.rows());
  Shape shape = x.shape();
  shape[mode] = out;
  DenseTensor y(std::move(shape));

  const double *src = x.data().data();
  double *dst = y.data().data();
  for (std::size_t l = 0; l < left; ++l) {
    for (std::size_t j = 0; j < out; ++j) {
      double *yrow = dst + (l * out + j) * right;
      for (std::size_t i = 0; i < in; ++i) {
        const double c = u(static_cast<Eigen::Index>(j),
                           static_cast<Eigen::Index>(i));
        if (c == 0.0)
          continue;
        const double *xrow = src + (l * in + i) * right;
        for (std::size_t r = 0; r < right; ++r)
          yrow[r] += c * xrow[r];
      }
    }
  }
  return y;
}

/// Mode-`mode` unfolding: I_mode x prod_{m != mode} I_m.
inline Matrix matricize(const DenseTensor &x, std::size_t mode) {
  detail::check_mode(x, mode);
  const Shape &shape = x.shape();
  const std::size_t n = shape.size();
  const std::size_t rows = shape[mode];
  const std::size_t cols = x.size() / rows;

  // Column stride of every mode other than `mode`, lowest mode fastest.
  std::vector<std::size_t> col_stride(n, 0);
  std::size_t s = 1;
  for (std::size_t m = 0; m < n; ++m) {
    if (m == mode)
      continue;
    col_stride[m] = s;
    s *= shape[m];
  }

  Matrix out(rows, cols);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t lin = 0; lin < x.size(); ++lin) {
    std::size_t c = 0;
    for (std::size_t m = 0; m < n; ++m)
      c += idx[m] * col_stride[m];
    out(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(c)) =
        x[lin];
    for (std::size_t m = n; m-- > 0;) {
      if (++idx[m] < shape[m])
        break;
      idx[m] = 0;
    }
  }
  return out;
}

/// Inverse of matricize for a tensor of the given shape.
inline DenseTensor fold(const Matrix &a, std::size_t mode, const Shape &shape) {
  DenseTensor x(shape);
  detail::check_mode(x, mode);
  if (static_cast<std::size_t>(a.rows()) != shape[mode] ||
      static_cast<std::size_t>(a.size()) != x.size())
    throw DimensionError("fold: matrix " + detail::shape_str(a.rows(), a.cols()) +
                         " does not unfold shape " + to_string(shape));
  const std::size_t n = shape.size();
  std::vector<std::size_t> col_stride(n, 0);
  std::size_t s = 1;
  for (std::size_t m = 0; m < n; ++m) {
    if (m == mode)
      continue;
    col_stride[m] = s;
    s *= shape[m];
  }
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t lin = 0; lin < x.size(); ++lin) {
    std::size_t c = 0;
    for (std::size_t m = 0; m < n; ++m)
      c += idx[m] * col_stride[m];
    x[lin] = a(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(c));
    for (std::size_t m = n; m-- > 0;) {
      if (++idx[m] < shape[m])
        break;
      idx[m] = 0;
    }
  }
  return x;
}

inline Matrix kron(const Matrix &a, const Matrix &b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Stacks M equally shaped tensors along a new trailing mode of extent M.
inline DenseTensor stack_last_mode(std::span<const DenseTensor> slices) {
  if (slices.empty())
    throw ValidationError("stack_last_mode: no slices");
  const Shape &base = slices.front().shape();
  for (const auto &s : slices)
    if (s.shape() != base)
      throw DimensionError("stack_last_mode: slice shape " +
                           to_string(s.shape()) + " differs from " +
                           to_string(base));
  Shape shape = base;
  const std::size_t m = slices.size();
  shape.push_back(m);
  DenseTensor x(std::move(shape));
  const std::size_t per = slices.front().size();
  for (std::size_t l = 0; l < m; ++l) {
    auto src = slices[l].data();
    for (std::size_t e = 0; e < per; ++e)
      x[e * m + l] = src[e];
  }
  return x;
}

/// Slice `index` along the last mode. An order-1 tensor yields shape (1).
inline DenseTensor slice_last_mode(const DenseTensor &x, std::size_t index) {
  const std::size_t m = x.dim(x.order() - 1);
  if (index >= m)
    throw DimensionError("slice index " + std::to_string(index) +
                         " out of range " + std::to_string(m));
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  if (shape.empty())
    shape.push_back(1);
  DenseTensor s(std::move(shape));
  for (std::size_t e = 0; e < s.size(); ++e)
    s[e] = x[e * m + index];
  return s;
}

struct ModeFactor {
  std::size_t mode;
  Matrix matrix;
};

/// Applies each factor along its mode. Modes must be distinct.
inline DenseTensor multi_mode_project(const DenseTensor &x,
                                      std::span<const ModeFactor> factors) {
  std::vector<bool> seen(x.order(), false);
  for (const auto &f : factors) {
    detail::check_mode(x, f.mode);
    if (seen[f.mode])
      throw InvalidModeError("multi_mode_project: mode " +
                             std::to_string(f.mode) + " given twice");
    seen[f.mode] = true;
  }
  DenseTensor y = x;
  for (const auto &f : factors)
    y = mode_n_product(y, f.matrix, f.mode);
  return y;
}

inline DenseTensor multi_mode_project(const DenseTensor &x,
                                      std::initializer_list<ModeFactor> factors) {
  return multi_mode_project(
      x, std::span<const ModeFactor>(factors.begin(), factors.size()));
}

inline double inner(const DenseTensor &x, const DenseTensor &y) {
  if (x.shape() != y.shape())
    throw DimensionError("inner: shapes " + to_string(x.shape()) + " and " +
                         to_string(y.shape()) + " differ");
  double s = 0.0;
  auto a = x.data();
  auto b = y.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

inline double frob_norm(const DenseTensor &x) { return std::sqrt(inner(x, x)); }

inline DenseTensor operator-(const DenseTensor &x, const DenseTensor &y) {
  if (x.shape() != y.shape())
    throw DimensionError("tensor difference: shapes differ");
  DenseTensor z = x;
  auto b = y.data();
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] -= b[i];
  return z;
}

} // namespace tclust
