#pragma once

// Riemannian trust-region solver with a Steihaug-Toint truncated CG inner
// solver. The solver is generic over a manifold adapter and a problem:
//
//   manifold.inner(x, a, b), manifold.retract(x, v), manifold.zero(x)
//   problem.value(x)
//   problem.model(x) -> object with a `gradient` member (Riemannian gradient)
//                       and `hessian(v)` (Riemannian Hessian-vector product)
//
// Tangent vectors must support addition and scaling by doubles.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tclust/errors.hpp"

namespace tclust {

template <class M>
concept RiemannianManifold =
    requires(const M &m, const typename M::Point &x,
             const typename M::Tangent &v) {
      { m.inner(x, v, v) } -> std::convertible_to<double>;
      { m.retract(x, v) } -> std::convertible_to<typename M::Point>;
      { m.zero(x) } -> std::convertible_to<typename M::Tangent>;
    };

template <class P, class M>
concept TrustRegionProblem =
    RiemannianManifold<M> &&
    requires(const P &p, const typename M::Point &x,
             const typename M::Tangent &v) {
      { p.value(x) } -> std::convertible_to<double>;
      { p.model(x).gradient } -> std::convertible_to<typename M::Tangent>;
      { p.model(x).hessian(v) } -> std::convertible_to<typename M::Tangent>;
    };

struct TrustRegionConfig {
  double delta_bar = 1.0;
  double delta0 = 0.125;
  double rho_prime = 0.1;
  int max_outer = 1000;
  int max_inner = 30;
  int min_inner = 1;
  double grad_tol = 1e-6;
  double theta = 1.0;
  double kappa = 0.1;

  /// Defaults for an M x K multinomial problem: delta_bar = sqrt(M K),
  /// delta0 = delta_bar / 8.
  static TrustRegionConfig for_dimension(double ambient_dim) {
    TrustRegionConfig cfg;
    cfg.delta_bar = std::sqrt(std::max(ambient_dim, 1.0));
    cfg.delta0 = cfg.delta_bar / 8.0;
    return cfg;
  }

  void validate() const {
    if (!(delta0 > 0.0) || !(delta0 <= delta_bar))
      throw ValidationError("trust region: need 0 < delta0 <= delta_bar");
    if (!(rho_prime > 0.0 && rho_prime < 0.25))
      throw ValidationError("trust region: rho_prime must lie in (0, 1/4)");
    if (max_outer < 1 || max_inner < 1 || min_inner < 0)
      throw ValidationError("trust region: iteration caps must be >= 1");
    if (!(grad_tol > 0.0))
      throw ValidationError("trust region: grad_tol must be positive");
    if (!(theta > 0.0) || !(kappa > 0.0 && kappa < 1.0))
      throw ValidationError("trust region: need theta > 0, 0 < kappa < 1");
  }
};

enum class TcgStop {
  NegativeCurvature,
  ExceededRadius,
  ReachedTarget,
  MaxInner,
  ModelIncreased,
};

enum class Termination {
  GradientTolerance,
  MaxIterations,
  RadiusCollapsed,
};

inline std::string_view to_string(TcgStop s) {
  switch (s) {
  case TcgStop::NegativeCurvature:
    return "negative curvature";
  case TcgStop::ExceededRadius:
    return "exceeded trust region";
  case TcgStop::ReachedTarget:
    return "reached target residual";
  case TcgStop::MaxInner:
    return "maximum inner iterations";
  case TcgStop::ModelIncreased:
    return "model increased";
  }
  return "unknown";
}

inline std::string_view to_string(Termination t) {
  switch (t) {
  case Termination::GradientTolerance:
    return "gradient tolerance";
  case Termination::MaxIterations:
    return "maximum iterations";
  case Termination::RadiusCollapsed:
    return "trust region collapsed";
  }
  return "unknown";
}

/// One outer iteration, as emitted to trace observers.
struct IterationRecord {
  int iteration = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  int inner = 0;
  bool accepted = false;
  TcgStop stop = TcgStop::MaxInner;
};

struct SolveStats {
  int outer_iterations = 0;
  int accepted_steps = 0;
  int inner_iterations = 0;
  /// Values at the initial point and after every accepted step.
  std::vector<double> objective_trace;
  std::vector<double> grad_norm_trace;
  Termination reason = Termination::MaxIterations;

  double final_objective() const { return objective_trace.back(); }
  double final_grad_norm() const { return grad_norm_trace.back(); }
};

template <class Tangent> struct TcgResult {
  Tangent eta;
  Tangent heta; // Hessian applied to eta
  int inner = 0;
  TcgStop stop = TcgStop::MaxInner;
};

/// Approximately minimizes m(eta) = <grad, eta> + 1/2 <H eta, eta> over
/// ||eta|| <= delta.
template <RiemannianManifold M, class Hess>
TcgResult<typename M::Tangent>
truncated_cg(const M &manifold, const typename M::Point &x,
             const typename M::Tangent &grad, Hess &&hess, double delta,
             const TrustRegionConfig &cfg) {
  using Tangent = typename M::Tangent;
  auto dot = [&](const Tangent &a, const Tangent &b) {
    return manifold.inner(x, a, b);
  };

  TcgResult<Tangent> out{manifold.zero(x), manifold.zero(x), 0,
                         TcgStop::MaxInner};
  Tangent r = grad;
  double r_r = dot(r, r);
  const double norm_r0 = std::sqrt(r_r);
  if (norm_r0 == 0.0) {
    out.stop = TcgStop::ReachedTarget;
    return out;
  }
  const double delta2 = delta * delta;
  Tangent mdelta = -r;
  double model_value = 0.0;

  for (int j = 0; j < cfg.max_inner; ++j) {
    const Tangent hd = hess(mdelta);
    const double d_hd = dot(mdelta, hd);
    if (!std::isfinite(d_hd))
      throw NumericalError("truncated CG: non-finite Hessian product");
    const double e_pe = dot(out.eta, out.eta);
    const double e_pd = dot(out.eta, mdelta);
    const double d_pd = dot(mdelta, mdelta);
    const double alpha = r_r / d_hd;
    const double e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

    if (d_hd <= 0.0 || e_pe_new >= delta2) {
      const double tau =
          (-e_pd + std::sqrt(e_pd * e_pd + d_pd * (delta2 - e_pe))) / d_pd;
      out.eta = out.eta + tau * mdelta;
      out.heta = out.heta + tau * hd;
      out.stop = d_hd <= 0.0 ? TcgStop::NegativeCurvature
                             : TcgStop::ExceededRadius;
      out.inner = j + 1;
      return out;
    }

    Tangent eta_new = out.eta + alpha * mdelta;
    Tangent heta_new = out.heta + alpha * hd;
    const double model_new =
        dot(eta_new, grad) + 0.5 * dot(eta_new, heta_new);
    if (model_new >= model_value) {
      out.stop = TcgStop::ModelIncreased;
      out.inner = j + 1;
      return out;
    }
    out.eta = std::move(eta_new);
    out.heta = std::move(heta_new);
    model_value = model_new;
    out.inner = j + 1;

    r = r + alpha * hd;
    const double r_r_old = r_r;
    r_r = dot(r, r);
    const double norm_r = std::sqrt(r_r);
    if (j + 1 >= cfg.min_inner &&
        norm_r <= norm_r0 * std::min(std::pow(norm_r0, cfg.theta), cfg.kappa)) {
      out.stop = TcgStop::ReachedTarget;
      return out;
    }
    const double beta = r_r / r_r_old;
    mdelta = -r + beta * mdelta;
  }
  out.stop = TcgStop::MaxInner;
  return out;
}

template <class Point> struct SolveResult {
  Point point;
  SolveStats stats;
};

using IterationObserver = std::function<void(const IterationRecord &)>;

/// Riemannian trust-region minimization of problem.value from x0. Only steps
/// with rho > rho_prime and no increase in the objective are accepted.
template <RiemannianManifold M, TrustRegionProblem<M> P>
SolveResult<typename M::Point>
solve(const M &manifold, const P &problem, typename M::Point x0,
      const TrustRegionConfig &cfg, const IterationObserver &observer = {}) {
  cfg.validate();
  using Point = typename M::Point;
  using Tangent = typename M::Tangent;

  Point x = std::move(x0);
  double fx = problem.value(x);
  auto model = problem.model(x);
  Tangent grad = model.gradient;
  double gnorm = std::sqrt(manifold.inner(x, grad, grad));
  if (!std::isfinite(fx) || !std::isfinite(gnorm))
    throw NumericalError("trust region: non-finite objective or gradient");

  SolveStats stats;
  stats.objective_trace.push_back(fx);
  stats.grad_norm_trace.push_back(gnorm);
  double delta = cfg.delta0;

  for (int k = 0;; ++k) {
    if (gnorm <= cfg.grad_tol) {
      stats.reason = Termination::GradientTolerance;
      break;
    }
    if (k >= cfg.max_outer) {
      stats.reason = Termination::MaxIterations;
      break;
    }
    if (delta < std::numeric_limits<double>::epsilon() * 1e-2 * cfg.delta_bar) {
      stats.reason = Termination::RadiusCollapsed;
      break;
    }

    auto tcg = truncated_cg(
        manifold, x, grad,
        [&](const Tangent &v) -> Tangent { return model.hessian(v); }, delta,
        cfg);
    stats.inner_iterations += tcg.inner;
    ++stats.outer_iterations;

    const double pred = -manifold.inner(x, grad, tcg.eta) -
                        0.5 * manifold.inner(x, tcg.heta, tcg.eta);

    std::optional<Point> proposal;
    double f_prop = std::numeric_limits<double>::infinity();
    try {
      proposal.emplace(manifold.retract(x, tcg.eta));
      f_prop = problem.value(*proposal);
    } catch (const NumericalError &) {
      // The trial point is unusable; treated as a rejected step.
      proposal.reset();
    }

    double rho = -std::numeric_limits<double>::infinity();
    if (proposal && std::isfinite(f_prop) &&
        pred > 1e-15 * std::abs(fx) && pred > 0.0)
      rho = (fx - f_prop) / pred;

    const bool boundary = tcg.stop == TcgStop::NegativeCurvature ||
                          tcg.stop == TcgStop::ExceededRadius;
    if (rho < 0.25)
      delta *= 0.25;
    else if (rho > 0.75 && boundary)
      delta = std::min(2.0 * delta, cfg.delta_bar);

    const bool accept = rho > cfg.rho_prime && f_prop <= fx;
    if (accept) {
      x = std::move(*proposal);
      fx = f_prop;
      model = problem.model(x);
      grad = model.gradient;
      gnorm = std::sqrt(manifold.inner(x, grad, grad));
      if (!std::isfinite(gnorm))
        throw NumericalError("trust region: non-finite gradient");
      ++stats.accepted_steps;
      stats.objective_trace.push_back(fx);
      stats.grad_norm_trace.push_back(gnorm);
    }

    if (observer)
      observer(IterationRecord{k + 1, fx, gnorm, delta, rho, tcg.inner,
                               accept, tcg.stop});
  }
  return {std::move(x), std::move(stats)};
}

} // namespace tclust
