#pragma once

// Geometry of the multinomial manifold: M x K matrices with strictly positive
// entries and unit row sums, under the Fisher information metric
//
//   g_U(xi, eta) = sum_{m,k} xi_mk eta_mk / U_mk.
//
// Tangent vectors at U are the M x K matrices whose rows sum to zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "tclust/errors.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

using TangentVector = Matrix;

/// Entries are clamped below at this value after a retraction.
inline constexpr double kPositivityFloor = 1e-16;
inline constexpr double kRowSumTolerance = 1e-12;

/// A validated point of the multinomial manifold.
class MultinomialPoint {
public:
  explicit MultinomialPoint(Matrix u) : u_(std::move(u)) {
    if (u_.rows() == 0 || u_.cols() == 0)
      throw DimensionError("multinomial point must be non-empty");
    for (Eigen::Index m = 0; m < u_.rows(); ++m) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < u_.cols(); ++k) {
        const double v = u_(m, k);
        if (!std::isfinite(v) || v <= 0.0)
          throw ValidationError("multinomial point row " + std::to_string(m) +
                                " has a non-positive or non-finite entry");
        s += v;
      }
      if (std::abs(s - 1.0) > kRowSumTolerance)
        throw ValidationError("multinomial point row " + std::to_string(m) +
                              " sums to " + std::to_string(s));
    }
  }

  /// Row-normalizes a positive matrix.
  static MultinomialPoint normalized(Matrix u) {
    for (Eigen::Index m = 0; m < u.rows(); ++m)
      u.row(m) /= u.row(m).sum();
    return MultinomialPoint(std::move(u));
  }

  const Matrix &matrix() const { return u_; }
  Eigen::Index rows() const { return u_.rows(); }
  Eigen::Index cols() const { return u_.cols(); }

private:
  Matrix u_;
};

namespace detail {

inline void check_same_shape(const Matrix &a, const Matrix &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape " +
                         shape_str(a.rows(), a.cols()) + " vs " +
                         shape_str(b.rows(), b.cols()));
}

} // namespace detail

inline double metric(const MultinomialPoint &u, const TangentVector &xi,
                     const TangentVector &eta) {
  detail::check_same_shape(u.matrix(), xi, "metric");
  detail::check_same_shape(u.matrix(), eta, "metric");
  return (xi.array() * eta.array() / u.matrix().array()).sum();
}

inline double metric_norm(const MultinomialPoint &u, const TangentVector &xi) {
  return std::sqrt(metric(u, xi, xi));
}

/// Fisher-orthogonal projection onto the tangent space: Z - (Z 1 1^T) .* U.
inline TangentVector project(const MultinomialPoint &u, const Matrix &z) {
  detail::check_same_shape(u.matrix(), z, "project");
  const Vector alpha = z.rowwise().sum();
  return z - (u.matrix().array().colwise() * alpha.array()).matrix();
}

/// R_U(t xi) = (U .* exp(t xi ./ U)) normalized per row.
///
/// Evaluated in log space with per-row max subtraction, which leaves the value
/// unchanged and cannot overflow.
inline MultinomialPoint retract(const MultinomialPoint &u,
                                const TangentVector &xi, double t = 1.0) {
  detail::check_same_shape(u.matrix(), xi, "retract");
  if (!std::isfinite(t) || !xi.allFinite())
    throw NumericalError("retract: non-finite step");
  const Matrix &p = u.matrix();
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index m = 0; m < p.rows(); ++m) {
    if (t == 0.0 || xi.row(m).isZero(0.0)) { // R_U(0) = U exactly
      out.row(m) = p.row(m);
      continue;
    }
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      out(m, k) = std::log(p(m, k)) + t * xi(m, k) / p(m, k);
      hi = std::max(hi, out(m, k));
    }
    out.row(m) = (out.row(m).array() - hi).exp();
    out.row(m) /= out.row(m).sum();
    if (out.row(m).minCoeff() < kPositivityFloor) {
      out.row(m) = out.row(m).cwiseMax(kPositivityFloor);
      out.row(m) /= out.row(m).sum();
    }
  }
  return MultinomialPoint(std::move(out));
}

/// Riemannian gradient from the Euclidean gradient G: Pi_U(G .* U).
inline TangentVector egrad_to_rgrad(const MultinomialPoint &u, const Matrix &g) {
  detail::check_same_shape(u.matrix(), g, "egrad_to_rgrad");
  return project(u, g.cwiseProduct(u.matrix()));
}

/// Riemannian Hessian along xi from the Euclidean gradient G and its
/// directional derivative DG = DGrad F(U)[xi].
inline TangentVector ehess_to_rhess(const MultinomialPoint &u, const Matrix &g,
                                    const Matrix &dg, const TangentVector &xi) {
  const Matrix &p = u.matrix();
  detail::check_same_shape(p, g, "ehess_to_rhess");
  detail::check_same_shape(p, dg, "ehess_to_rhess");
  detail::check_same_shape(p, xi, "ehess_to_rhess");

  const TangentVector grad = egrad_to_rgrad(u, g);
  const Vector alpha = g.cwiseProduct(p).rowwise().sum();
  const Matrix dscaled = dg.cwiseProduct(p) + g.cwiseProduct(xi);
  const Vector dalpha = dscaled.rowwise().sum();

  // Euclidean directional derivative of the Riemannian gradient.
  const Matrix dgrad = dscaled -
                       (xi.array().colwise() * alpha.array()).matrix() -
                       (p.array().colwise() * dalpha.array()).matrix();
  const Matrix connection =
      (0.5 * xi.array() * grad.array() / p.array()).matrix();
  return project(u, dgrad - connection);
}

inline MultinomialPoint random_point(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw DimensionError("random_point: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Matrix u(rows, cols);
  for (Eigen::Index m = 0; m < rows; ++m)
    for (Eigen::Index k = 0; k < cols; ++k) {
      double v = 0.0;
      while (v == 0.0)
        v = dist(rng);
      u(m, k) = v;
    }
  return MultinomialPoint::normalized(std::move(u));
}

/// Unit-norm tangent vector at u; zero when K = 1.
inline TangentVector random_tangent(const MultinomialPoint &u,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(u.rows(), u.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z.data()[i] = dist(rng);
  TangentVector xi = project(u, z);
  const double n = metric_norm(u, xi);
  if (u.cols() == 1 || n == 0.0)
    return TangentVector::Zero(u.rows(), u.cols());
  return xi / n;
}

/// Adapter exposing the multinomial geometry to the trust-region solver.
struct MultinomialManifold {
  using Point = MultinomialPoint;
  using Tangent = TangentVector;

  double inner(const Point &u, const Tangent &a, const Tangent &b) const {
    return metric(u, a, b);
  }
  Tangent zero(const Point &u) const {
    return Tangent::Zero(u.rows(), u.cols());
  }
  Point retract(const Point &u, const Tangent &xi) const {
    return tclust::retract(u, xi, 1.0);
  }
};

} // namespace tclust
