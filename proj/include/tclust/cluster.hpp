#pragma once

// Alternating fit of the heterogeneous Tucker model
//
//   X ~ G x_1 U_1 ... x_{N-1} U_{N-1} x_N U_N,
//
// with orthonormal-column U_1..U_{N-1} and a row-stochastic membership U_N.
// Each outer iteration runs the trust-region solver on U_N and then sweeps
// closed-form updates of the leading factors. The membership rows are
// finally clustered with k-means.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "tclust/errors.hpp"
#include "tclust/kmeans.hpp"
#include "tclust/manifold.hpp"
#include "tclust/objective.hpp"
#include "tclust/problem.hpp"
#include "tclust/rtr.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

struct FactorSet {
  /// U_1..U_{N-1}, each I_n x J_n with orthonormal columns.
  std::vector<Matrix> factors;
  MultinomialPoint membership;
  /// J_1 x ... x J_{N-1} x K
  DenseTensor core;
  std::vector<double> error_trace;
};

enum class InitStrategy { Random, HosvdI, HosvdII };

inline std::string_view to_string(InitStrategy s) {
  switch (s) {
  case InitStrategy::Random:
    return "random";
  case InitStrategy::HosvdI:
    return "hosvd1";
  case InitStrategy::HosvdII:
    return "hosvd2";
  }
  return "unknown";
}

inline InitStrategy parse_init_strategy(std::string_view s) {
  if (s == "random")
    return InitStrategy::Random;
  if (s == "hosvd1" || s == "hosvd_i")
    return InitStrategy::HosvdI;
  if (s == "hosvd2" || s == "hosvd_ii")
    return InitStrategy::HosvdII;
  throw ValidationError("unknown init strategy '" + std::string(s) + "'");
}

struct ClusterConfig {
  int clusters = 2;
  /// J_1..J_{N-1}; empty selects min(I_n, 12) per mode.
  std::vector<std::size_t> core_dims;
  int max_outer = 250;
  int factor_sweeps_per_outer = 2;
  int rtr_first_call_outer = 1000;
  int rtr_subsequent_outer = 5;
  int rtr_max_inner = 30;
  double rtr_grad_tol = 1e-6;
  InitStrategy init = InitStrategy::HosvdI;
  std::uint64_t seed = 0;
  double early_stop_rel_tol = 1e-8;
  KMeansConfig kmeans;
};

struct OuterIterationRecord {
  int iteration = 0;
  double f = 0.0; // model error at the optimal core
  double h = 0.0;
  SolveStats rtr;
};

struct ClusteringResult {
  std::vector<int> labels;
  FactorSet factors;
  std::vector<DenseTensor> centroids;
  std::vector<OuterIterationRecord> diagnostics;
  /// The long membership solve of HOSVD initialization I, when used.
  std::optional<SolveStats> init_rtr;
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Leading `count` left singular vectors of b (full basis when count exceeds
/// the number of columns).
inline Matrix top_left_singular_vectors(const Matrix &b, Eigen::Index count) {
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU);
  return svd.matrixU().leftCols(count);
}

inline Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a.data()[i] = dist(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

inline std::size_t sample_mode(const DenseTensor &x) { return x.order() - 1; }

/// X projected by U_m^T on every leading mode except `skip`, and by `last` on
/// the sample mode when given.
inline DenseTensor project_leading(const DenseTensor &x,
                                   std::span<const Matrix> factors,
                                   std::optional<std::size_t> skip,
                                   const Matrix *last) {
  DenseTensor y = last ? mode_n_product(x, *last, sample_mode(x)) : x;
  for (std::size_t m = 0; m < factors.size(); ++m)
    if (!skip || *skip != m)
      y = mode_n_product(y, factors[m].transpose(), m);
  return y;
}

/// L^{-1} U^T for U^T U = L L^T: K x M with orthonormal rows spanning the
/// column space of U, so V_N = Q Q^T with Q its transpose.
inline Matrix membership_half_projector(const MultinomialPoint &u) {
  GramFactor gram(u.matrix());
  return gram.half_solve(u.matrix().transpose());
}

inline void check_factor_set(const DenseTensor &x, const FactorSet &fs) {
  if (x.order() < 2)
    throw DimensionError("tensor order must be at least 2");
  if (fs.factors.size() != x.order() - 1)
    throw DimensionError("factor set has " + std::to_string(fs.factors.size()) +
                         " factors for an order-" + std::to_string(x.order()) +
                         " tensor");
  for (std::size_t n = 0; n < fs.factors.size(); ++n)
    if (static_cast<std::size_t>(fs.factors[n].rows()) != x.dim(n))
      throw DimensionError("factor " + std::to_string(n) + " has " +
                           std::to_string(fs.factors[n].rows()) +
                           " rows, mode extent is " + std::to_string(x.dim(n)));
  if (static_cast<std::size_t>(fs.membership.rows()) != x.dim(sample_mode(x)))
    throw DimensionError("membership rows do not match the sample count");
}

} // namespace detail

/// Orthogonal polar factor P Q^T of the thin SVD A = P S Q^T.
inline Matrix uf(const Matrix &a) {
  if (a.rows() < a.cols())
    throw DimensionError("uf: need rows >= cols, got " +
                         detail::shape_str(a.rows(), a.cols()));
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &s = svd.singularValues();
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(a.rows()) * s(0);
  if (s.size() == 0 || !(s(s.size() - 1) > tol))
    throw RankDeficientError("uf: matrix is rank deficient");
  return svd.matrixU() * svd.matrixV().transpose();
}

/// h(U) = 1/2 || X x_1 U_1^T ... x_{N-1} U_{N-1}^T x_N V_N ||_F^2.
inline double h_value(const DenseTensor &x, const FactorSet &fs) {
  detail::check_factor_set(x, fs);
  const Matrix q = detail::membership_half_projector(fs.membership);
  const DenseTensor y = detail::project_leading(x, fs.factors, std::nullopt, &q);
  return 0.5 * inner(y, y);
}

/// Full reconstruction G x_1 U_1 ... x_N U_N.
inline DenseTensor reconstruct(const FactorSet &fs) {
  DenseTensor y = fs.core;
  for (std::size_t m = 0; m < fs.factors.size(); ++m)
    y = mode_n_product(y, fs.factors[m], m);
  return mode_n_product(y, fs.membership.matrix(), fs.factors.size());
}

/// f = 1/2 ||X - reconstruct(fs)||^2, evaluated directly.
inline double model_error(const DenseTensor &x, const FactorSet &fs) {
  const DenseTensor r = x - reconstruct(fs);
  return 0.5 * inner(r, r);
}

/// Least-squares core for fixed factors:
/// X x_1 U_1^T ... x_{N-1} U_{N-1}^T x_N (U_N^T U_N)^{-1} U_N^T.
inline DenseTensor recover_core(const DenseTensor &x, const FactorSet &fs) {
  detail::check_factor_set(x, fs);
  GramFactor gram(fs.membership.matrix());
  const Matrix pinv = gram.solve(fs.membership.matrix().transpose());
  return detail::project_leading(x, fs.factors, std::nullopt, &pinv);
}

/// Maximizer of ||U_n^T B_n||_F over orthonormal I_n x J_n matrices: the top
/// J_n left singular vectors of the mode-n unfolding of X projected by every
/// other factor (V_N on the sample mode).
inline Matrix update_factor_n(const DenseTensor &x, const FactorSet &fs,
                              std::size_t n) {
  detail::check_factor_set(x, fs);
  if (n >= fs.factors.size())
    throw InvalidModeError("update_factor_n: mode " + std::to_string(n) +
                           " is not a leading mode");
  const Matrix q = detail::membership_half_projector(fs.membership);
  const DenseTensor y = detail::project_leading(x, fs.factors, n, &q);
  return detail::top_left_singular_vectors(matricize(y, n),
                                           fs.factors[n].cols());
}

struct HooiResult {
  std::vector<Matrix> factors;
  DenseTensor core;
  /// ||core||^2 after initialization and after each sweep.
  std::vector<double> fit_trace;
  int sweeps = 0;
};

namespace detail {

// Alternating per-mode principal subspaces on modes [0, active); the remaining
// modes are left unprojected.
inline HooiResult alternating_subspaces(const DenseTensor &x,
                                        std::span<const std::size_t> dims,
                                        std::size_t active, double rel_tol,
                                        int max_sweeps) {
  for (std::size_t n = 0; n < active; ++n)
    if (dims[n] < 1 || dims[n] > x.dim(n))
      throw ValidationError("core dimension " + std::to_string(dims[n]) +
                            " invalid for mode " + std::to_string(n) +
                            " of extent " + std::to_string(x.dim(n)));
  HooiResult res;
  for (std::size_t n = 0; n < active; ++n)
    res.factors.push_back(top_left_singular_vectors(
        matricize(x, n), static_cast<Eigen::Index>(dims[n])));

  auto project_all = [&](std::optional<std::size_t> skip) {
    DenseTensor y = x;
    for (std::size_t m = 0; m < active; ++m)
      if (!skip || *skip != m)
        y = mode_n_product(y, res.factors[m].transpose(), m);
    return y;
  };

  res.core = project_all(std::nullopt);
  res.fit_trace.push_back(inner(res.core, res.core));
  for (int s = 0; s < max_sweeps; ++s) {
    for (std::size_t n = 0; n < active; ++n)
      res.factors[n] = top_left_singular_vectors(
          matricize(project_all(n), n), static_cast<Eigen::Index>(dims[n]));
    res.core = project_all(std::nullopt);
    const double fit = inner(res.core, res.core);
    const double prev = res.fit_trace.back();
    res.fit_trace.push_back(fit);
    res.sweeps = s + 1;
    if (std::abs(fit - prev) <= rel_tol * std::max(prev, 1e-300))
      break;
  }
  return res;
}

} // namespace detail

/// Higher-order orthogonal iteration: HOSVD start, then alternating top-J_n
/// subspace updates until the relative fit change is below 1e-8 or 50 sweeps.
inline HooiResult hooi(const DenseTensor &x, std::span<const std::size_t> dims) {
  if (dims.size() != x.order())
    throw DimensionError("hooi: need one core dimension per mode");
  return detail::alternating_subspaces(x, dims, x.order(), 1e-8, 50);
}

/// Resolves default core dimensions and checks the configuration against X.
inline ClusterConfig resolve_config(const DenseTensor &x, ClusterConfig cfg) {
  if (x.order() < 2)
    throw ValidationError("clustering needs a tensor of order >= 2");
  const std::size_t lead = x.order() - 1;
  const std::size_t m = x.dim(lead);
  if (cfg.clusters < 1)
    throw ValidationError("number of clusters must be at least 1");
  if (static_cast<std::size_t>(cfg.clusters) > m)
    throw ValidationError("number of clusters (" +
                          std::to_string(cfg.clusters) +
                          ") exceeds number of samples (" + std::to_string(m) +
                          ")");
  if (cfg.core_dims.empty())
    for (std::size_t n = 0; n < lead; ++n)
      cfg.core_dims.push_back(std::min<std::size_t>(x.dim(n), 12));
  if (cfg.core_dims.size() != lead)
    throw ValidationError("expected " + std::to_string(lead) +
                          " core dimensions, got " +
                          std::to_string(cfg.core_dims.size()));
  for (std::size_t n = 0; n < lead; ++n)
    if (cfg.core_dims[n] < 1 || cfg.core_dims[n] > x.dim(n))
      throw ValidationError("core dimension " + std::to_string(n) + " = " +
                            std::to_string(cfg.core_dims[n]) +
                            " must lie in [1, " + std::to_string(x.dim(n)) +
                            "]");
  if (cfg.max_outer < 1 || cfg.factor_sweeps_per_outer < 1 ||
      cfg.rtr_first_call_outer < 1 || cfg.rtr_subsequent_outer < 1 ||
      cfg.rtr_max_inner < 1)
    throw ValidationError("iteration budgets must be at least 1");
  if (!(cfg.rtr_grad_tol > 0.0) || !(cfg.early_stop_rel_tol >= 0.0))
    throw ValidationError("tolerances must be positive");
  return cfg;
}

namespace detail {

inline FactorSet make_factor_set(const DenseTensor &x, std::vector<Matrix> u,
                                 MultinomialPoint membership) {
  FactorSet fs{std::move(u), std::move(membership), DenseTensor{}, {}};
  fs.core = recover_core(x, fs);
  return fs;
}

inline TrustRegionConfig rtr_config(const ClusterConfig &cfg, Eigen::Index m,
                                    int budget) {
  auto rc = TrustRegionConfig::for_dimension(
      static_cast<double>(m) * static_cast<double>(cfg.clusters));
  rc.max_outer = budget;
  rc.max_inner = cfg.rtr_max_inner;
  rc.grad_tol = cfg.rtr_grad_tol;
  return rc;
}

/// Minimizes F over the membership with the leading factors fixed.
inline SolveStats solve_membership(const DenseTensor &x, FactorSet &fs,
                                   const ClusterConfig &cfg, int budget) {
  const ObjectiveInstance objective(build_B(x, fs.factors));
  const MultinomialProblem problem(objective);
  auto res = solve(MultinomialManifold{}, problem, fs.membership,
                   rtr_config(cfg, fs.membership.rows(), budget));
  fs.membership = std::move(res.point);
  return std::move(res.stats);
}

} // namespace detail

/// Orthonormal factors from seeded Gaussian matrices; random membership.
inline FactorSet init_random(const DenseTensor &x, const ClusterConfig &config) {
  const ClusterConfig cfg = resolve_config(x, config);
  std::vector<Matrix> u;
  for (std::size_t n = 0; n + 1 < x.order(); ++n)
    u.push_back(detail::random_orthonormal(
        static_cast<Eigen::Index>(x.dim(n)),
        static_cast<Eigen::Index>(cfg.core_dims[n]),
        detail::derive_seed(cfg.seed, n + 1)));
  auto membership =
      random_point(static_cast<Eigen::Index>(x.dim(x.order() - 1)),
                   cfg.clusters, detail::derive_seed(cfg.seed, 0));
  return detail::make_factor_set(x, std::move(u), std::move(membership));
}

/// Leading factors from HOOI of X (sample mode truncated to K), then one long
/// membership solve with those factors fixed.
inline FactorSet init_hosvd_i(const DenseTensor &x, const ClusterConfig &config,
                              SolveStats *stats = nullptr) {
  const ClusterConfig cfg = resolve_config(x, config);
  std::vector<std::size_t> dims = cfg.core_dims;
  dims.push_back(static_cast<std::size_t>(cfg.clusters));
  HooiResult h = hooi(x, dims);
  h.factors.pop_back();
  auto membership =
      random_point(static_cast<Eigen::Index>(x.dim(x.order() - 1)),
                   cfg.clusters, detail::derive_seed(cfg.seed, 0));
  FactorSet fs{std::move(h.factors), std::move(membership), DenseTensor{}, {}};
  SolveStats s = detail::solve_membership(x, fs, cfg, cfg.rtr_first_call_outer);
  if (stats)
    *stats = std::move(s);
  fs.core = recover_core(x, fs);
  return fs;
}

/// Shared leading factors fitted to all slices at once (sample mode left
/// unprojected); membership as in init_random.
inline FactorSet init_hosvd_ii(const DenseTensor &x,
                               const ClusterConfig &config) {
  const ClusterConfig cfg = resolve_config(x, config);
  HooiResult h = detail::alternating_subspaces(x, cfg.core_dims, x.order() - 1,
                                               1e-8, 50);
  auto membership =
      random_point(static_cast<Eigen::Index>(x.dim(x.order() - 1)),
                   cfg.clusters, detail::derive_seed(cfg.seed, 0));
  return detail::make_factor_set(x, std::move(h.factors),
                                 std::move(membership));
}

/// Slices of G x_1 U_1 ... x_{N-1} U_{N-1} along the cluster mode.
inline std::vector<DenseTensor> reconstruct_centroids(const FactorSet &fs) {
  DenseTensor y = fs.core;
  for (std::size_t m = 0; m < fs.factors.size(); ++m)
    y = mode_n_product(y, fs.factors[m], m);
  std::vector<DenseTensor> out;
  const std::size_t k = y.dim(y.order() - 1);
  for (std::size_t c = 0; c < k; ++c)
    out.push_back(slice_last_mode(y, c));
  return out;
}

using FitObserver =
    std::function<void(const OuterIterationRecord &, const FactorSet &)>;

inline ClusteringResult fit(const DenseTensor &x, const ClusterConfig &config,
                            const FitObserver &observer = {}) {
  const ClusterConfig cfg = resolve_config(x, config);
  std::optional<SolveStats> init_rtr;
  bool long_solve_done = false;
  FactorSet fs = [&] {
    switch (cfg.init) {
    case InitStrategy::HosvdI: {
      SolveStats s;
      FactorSet f = init_hosvd_i(x, cfg, &s);
      init_rtr = std::move(s);
      long_solve_done = true;
      return f;
    }
    case InitStrategy::HosvdII:
      return init_hosvd_ii(x, cfg);
    case InitStrategy::Random:
      break;
    }
    return init_random(x, cfg);
  }();
  std::vector<OuterIterationRecord> diagnostics;

  const double half_norm2 = 0.5 * inner(x, x);
  for (int t = 1; t <= cfg.max_outer; ++t) {
    const int budget =
        long_solve_done ? cfg.rtr_subsequent_outer : cfg.rtr_first_call_outer;
    long_solve_done = true;

    OuterIterationRecord rec;
    rec.iteration = t;
    rec.rtr = detail::solve_membership(x, fs, cfg, budget);
    for (int s = 0; s < cfg.factor_sweeps_per_outer; ++s)
      for (std::size_t n = 0; n < fs.factors.size(); ++n)
        fs.factors[n] = update_factor_n(x, fs, n);

    rec.h = h_value(x, fs);
    rec.f = half_norm2 - rec.h;
    const bool has_prev = !fs.error_trace.empty();
    const double prev = has_prev ? fs.error_trace.back() : 0.0;
    fs.error_trace.push_back(rec.f);
    if (observer)
      observer(rec, fs);
    diagnostics.push_back(std::move(rec));

    if (has_prev &&
        std::abs(fs.error_trace.back() - prev) / std::max(prev, 1e-30) <
            cfg.early_stop_rel_tol)
      break;
  }

  fs.core = recover_core(x, fs);
  std::vector<int> labels = kmeans(fs.membership.matrix(), cfg.clusters,
                                   detail::derive_seed(cfg.seed, 0x6b6d),
                                   cfg.kmeans)
                                .labels;
  std::vector<DenseTensor> centroids = reconstruct_centroids(fs);
  return ClusteringResult{std::move(labels), std::move(fs),
                          std::move(centroids), std::move(diagnostics),
                          std::move(init_rtr)};
}

} // namespace tclust
