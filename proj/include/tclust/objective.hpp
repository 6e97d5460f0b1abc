#pragma once

// Last-mode clustering objective
//
//   F(U) = -1/2 tr(B^T U (U^T U)^{-1} U^T B),
//
// its Euclidean gradient and the directional derivative of that gradient.
// BB^T is never formed; every product with it is associated as B (B^T .).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "tclust/errors.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

/// Gram matrices whose condition estimate exceeds this are rejected.
inline constexpr double kMaxGramCondition = 1e12;

/// Cholesky factor of U^T U, with a rank check on the way in.
class GramFactor {
public:
  explicit GramFactor(const Matrix &u) {
    const Matrix gram = u.transpose() * u;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxGramCondition)
      throw RankDeficientError(
          "membership matrix is numerically rank deficient (Gram condition " +
          std::to_string(lo > 0.0 ? hi / lo : INFINITY) + ")");
    llt_.compute(gram);
  }

  /// (U^T U)^{-1} X
  Matrix solve(const Matrix &x) const { return llt_.solve(x); }
  /// X (U^T U)^{-1}
  Matrix rsolve(const Matrix &x) const {
    return llt_.solve(x.transpose()).transpose();
  }
  /// L^{-1} X for U^T U = L L^T.
  Matrix half_solve(const Matrix &x) const {
    return llt_.matrixL().solve(x);
  }

private:
  Eigen::LLT<Matrix> llt_;
};

inline Matrix sym(const Matrix &a) { return 0.5 * (a + a.transpose()); }

class ObjectiveInstance {
public:
  /// Cached quantities of the objective at one U.
  class Evaluation {
  public:
    Evaluation(const Matrix &b, const Matrix &u)
        : b_(&b), u_(u), gram_(u), w_(b.transpose() * u),
          a_(w_.transpose() * w_), bw_(b * w_) {}

    double value() const { return -0.5 * gram_.solve(a_).trace(); }

    Matrix egrad() const {
      return -gram_.rsolve(bw_) + u_ * gram_.solve(gram_.rsolve(a_));
    }

    /// DGrad F(U)[xi]
    Matrix dgrad(const Matrix &xi) const {
      if (xi.rows() != u_.rows() || xi.cols() != u_.cols())
        throw DimensionError("dgrad: direction shape " +
                             detail::shape_str(xi.rows(), xi.cols()));
      const Matrix &b = *b_;
      const Matrix btxi = b.transpose() * xi; // P x K
      const Matrix cxi = b * btxi;            // B B^T xi
      const Matrix ut_xi_sym = sym(u_.transpose() * xi);
      const Matrix xit_cu_sym = sym(btxi.transpose() * w_);
      const Matrix sinv_a_sinv = gram_.solve(gram_.rsolve(a_));
      const Matrix u_sinv = gram_.rsolve(u_);

      Matrix out = -gram_.rsolve(cxi);
      out += xi * sinv_a_sinv;
      out += 2.0 * gram_.rsolve(gram_.rsolve(bw_) * ut_xi_sym);
      out += 2.0 * gram_.rsolve(u_sinv * xit_cu_sym);
      const Matrix a_sinv = gram_.rsolve(a_);
      const Matrix sym_sinv = gram_.rsolve(ut_xi_sym);
      out -= 2.0 * u_sinv * sym_sinv * a_sinv;
      out -= 2.0 * u_sinv * a_sinv * sym_sinv;
      return out;
    }

  private:
    const Matrix *b_;
    Matrix u_;
    GramFactor gram_;
    Matrix w_;  // B^T U
    Matrix a_;  // U^T B B^T U
    Matrix bw_; // B B^T U
  };

  explicit ObjectiveInstance(Matrix b) : b_(std::move(b)) {
    if (b_.rows() == 0 || b_.cols() == 0)
      throw DimensionError("objective: B must be non-empty");
    if (!b_.allFinite())
      throw ValidationError("objective: B has non-finite entries");
  }

  const Matrix &b() const { return b_; }
  Eigen::Index samples() const { return b_.rows(); }

  Evaluation evaluate(const Matrix &u) const {
    check(u);
    return Evaluation(b_, u);
  }

  double value(const Matrix &u) const { return evaluate(u).value(); }
  Matrix egrad(const Matrix &u) const { return evaluate(u).egrad(); }
  Matrix dgrad(const Matrix &u, const Matrix &xi) const {
    return evaluate(u).dgrad(xi);
  }

private:
  void check(const Matrix &u) const {
    if (u.rows() != b_.rows())
      throw DimensionError("objective: U has " + std::to_string(u.rows()) +
                           " rows, B has " + std::to_string(b_.rows()));
  }

  Matrix b_;
};

/// B = X_(N) [U_{N-1} (x) ... (x) U_1], computed by sequential mode products
/// with U_n^T on the leading modes. `factors` holds one I_n x J_n matrix per
/// leading mode.
inline Matrix build_B(const DenseTensor &x, std::span<const Matrix> factors) {
  if (x.order() < 2)
    throw DimensionError("build_B: tensor order must be at least 2");
  if (factors.size() != x.order() - 1)
    throw DimensionError("build_B: expected " + std::to_string(x.order() - 1) +
                         " factors, got " + std::to_string(factors.size()));
  DenseTensor y = x;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (static_cast<std::size_t>(factors[n].rows()) != x.dim(n))
      throw DimensionError("build_B: factor " + std::to_string(n) + " has " +
                           std::to_string(factors[n].rows()) +
                           " rows, mode extent is " + std::to_string(x.dim(n)));
    y = mode_n_product(y, factors[n].transpose(), n);
  }
  return matricize(y, x.order() - 1);
}

} // namespace tclust
