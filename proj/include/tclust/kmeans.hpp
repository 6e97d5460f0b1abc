#pragma once

// Lloyd's k-means with k-means++ seeding and restarts. Squared Euclidean
// distance; ties go to the lowest cluster index.

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tclust/errors.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

struct KMeansConfig {
  int restarts = 20;
  int max_iterations = 300;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers; // K x D
  double inertia = 0.0;
  int iterations = 0;
};

namespace detail {

inline Matrix kmeanspp_seed(const Matrix &rows, int k, std::mt19937_64 &rng) {
  const Eigen::Index n = rows.rows();
  Matrix centers(k, rows.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  Eigen::Index first = pick(rng);
  centers.row(0) = rows.row(first);
  chosen[static_cast<std::size_t>(first)] = true;

  Vector d2 = (rows.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index next = -1;
    if (total > 0.0) {
      double target = unit(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2(i) <= 0.0)
          continue;
        next = i;
        target -= d2(i);
        if (target < 0.0)
          break;
      }
    }
    if (next < 0) // every point coincides with a center
      for (Eigen::Index i = 0; i < n && next < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)])
          next = i;
    chosen[static_cast<std::size_t>(next)] = true;
    centers.row(c) = rows.row(next);
    d2 = d2.cwiseMin(
        (rows.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix &rows, Matrix centers, int max_iter) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index k = centers.rows();
  KMeansResult res;
  res.labels.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);

  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        const double d = (rows.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      dist(i) = best_d;
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    res.iterations = it + 1;
    if (!changed && it > 0)
      break;

    Matrix sums = Matrix::Zero(k, rows.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += rows.row(i);
      ++counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move the worst-fit point into it.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      centers.row(c) = rows.row(far);
      dist(far) = 0.0;
      --counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(far)])];
      res.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      counts[static_cast<std::size_t>(c)] = 1;
    }
  }

  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    res.inertia +=
        (rows.row(i) - centers.row(res.labels[static_cast<std::size_t>(i)]))
            .squaredNorm();
  res.centers = std::move(centers);
  return res;
}

} // namespace detail

/// Clusters the rows of `rows` into k groups; deterministic given the seed.
inline KMeansResult kmeans(const Matrix &rows, int k, std::uint64_t seed,
                           const KMeansConfig &cfg = {}) {
  if (k < 1)
    throw ValidationError("kmeans: k must be at least 1");
  if (rows.rows() < k)
    throw ValidationError("kmeans: fewer rows (" + std::to_string(rows.rows()) +
                          ") than clusters (" + std::to_string(k) + ")");
  if (cfg.restarts < 1 || cfg.max_iterations < 1)
    throw ValidationError("kmeans: restarts and iterations must be >= 1");
  if (!rows.allFinite())
    throw NumericalError("kmeans: non-finite input");

  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    KMeansResult res =
        detail::lloyd(rows, detail::kmeanspp_seed(rows, k, rng),
                      cfg.max_iterations);
    if (res.inertia < best.inertia)
      best = std::move(res);
  }
  return best;
}

} // namespace tclust
