#pragma once

// Clustering accuracy under the best one-to-one label matching, and
// normalized mutual information with base-2 logarithms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "tclust/errors.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

using Label = long long;

struct Assignment {
  /// row_to_col[i] is the column matched to row i of the padded square matrix.
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching (Hungarian method with potentials). A
/// rectangular cost matrix is zero-padded to square.
inline Assignment kuhn_munkres(const Matrix &cost) {
  if (!cost.allFinite())
    throw ValidationError("kuhn_munkres: non-finite cost entry");
  const int n = static_cast<int>(std::max(cost.rows(), cost.cols()));
  Assignment out;
  if (n == 0)
    return out;
  Matrix a = Matrix::Zero(n, n);
  a.topLeftCorner(cost.rows(), cost.cols()) = cost;

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    out.row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  for (int i = 0; i < n; ++i)
    out.cost += a(i, out.row_to_col[static_cast<std::size_t>(i)]);
  return out;
}

namespace detail {

/// Maps arbitrary ids onto 0..C-1 in increasing id order.
inline std::vector<int> compact_labels(std::span<const Label> labels,
                                       int &classes) {
  std::map<Label, int> ids;
  for (Label l : labels) {
    if (l < 0)
      throw ValidationError("labels must be non-negative");
    ids.emplace(l, 0);
  }
  int next = 0;
  for (auto &[id, dense] : ids)
    dense = next++;
  classes = next;
  std::vector<int> out;
  out.reserve(labels.size());
  for (Label l : labels)
    out.push_back(ids.at(l));
  return out;
}

/// Rows: classes of `a`; columns: classes of `b`.
inline Matrix contingency(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size())
    throw ValidationError("label vectors differ in length (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.empty())
    throw ValidationError("label vectors must be non-empty");
  int ca = 0, cb = 0;
  const auto da = compact_labels(a, ca);
  const auto db = compact_labels(b, cb);
  Matrix t = Matrix::Zero(ca, cb);
  for (std::size_t i = 0; i < da.size(); ++i)
    t(da[i], db[i]) += 1.0;
  return t;
}

inline double entropy_bits(const Vector &counts, double total) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts(i) > 0.0) {
      const double p = counts(i) / total;
      h -= p * std::log2(p);
    }
  return h;
}

} // namespace detail

/// Fraction of samples matched under the best injective mapping of predicted
/// classes onto true classes.
inline double accuracy(std::span<const Label> truth,
                       std::span<const Label> predicted) {
  const Matrix table = detail::contingency(predicted, truth);
  const Assignment match = kuhn_munkres(-table);
  return -match.cost / static_cast<double>(truth.size());
}

inline double nmi(std::span<const Label> truth,
                  std::span<const Label> predicted) {
  const Matrix table = detail::contingency(truth, predicted);
  const double total = static_cast<double>(truth.size());
  const Vector rows = table.rowwise().sum();
  const Vector cols = table.colwise().sum().transpose();
  const double denom = std::max(detail::entropy_bits(rows, total),
                                detail::entropy_bits(cols, total));
  if (denom == 0.0) {
    // Both labelings are a single class; identical partitions score 1.
    return table.rows() == 1 && table.cols() == 1 ? 1.0 : 0.0;
  }
  double mi = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double n = table(i, j);
      if (n > 0.0)
        mi += (n / total) * std::log2(n * total / (rows(i) * cols(j)));
    }
  return std::clamp(mi / denom, 0.0, 1.0);
}

template <class T> std::vector<Label> to_labels(const std::vector<T> &v) {
  return std::vector<Label>(v.begin(), v.end());
}

} // namespace tclust
