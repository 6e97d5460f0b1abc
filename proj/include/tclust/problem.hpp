#pragma once

#include <utility>

#include "tclust/manifold.hpp"
#include "tclust/rtr.hpp"

namespace tclust {

/// An objective on M x K matrices. `evaluate(U)` returns an object exposing
/// value(), egrad() and dgrad(xi); it may cache work shared by the three.
template <class F>
concept EuclideanObjective = requires(const F &f, const Matrix &u) {
  { f.evaluate(u).value() } -> std::convertible_to<double>;
  { f.evaluate(u).egrad() } -> std::convertible_to<Matrix>;
  { f.evaluate(u).dgrad(u) } -> std::convertible_to<Matrix>;
};

/// Restricts a Euclidean objective to the multinomial manifold, converting
/// derivatives with egrad_to_rgrad / ehess_to_rhess.
template <EuclideanObjective F> class MultinomialProblem {
public:
  using Eval = decltype(std::declval<const F &>().evaluate(Matrix{}));

  struct Model {
    MultinomialPoint point;
    Eval eval;
    Matrix egrad;
    TangentVector gradient;

    TangentVector hessian(const TangentVector &xi) const {
      return ehess_to_rhess(point, egrad, eval.dgrad(xi), xi);
    }
  };

  explicit MultinomialProblem(const F &objective) : f_(&objective) {}

  double value(const MultinomialPoint &u) const {
    return f_->evaluate(u.matrix()).value();
  }

  Model model(const MultinomialPoint &u) const {
    Eval eval = f_->evaluate(u.matrix());
    Matrix g = eval.egrad();
    TangentVector grad = egrad_to_rgrad(u, g);
    return Model{u, std::move(eval), std::move(g), std::move(grad)};
  }

private:
  const F *f_;
};

} // namespace tclust
