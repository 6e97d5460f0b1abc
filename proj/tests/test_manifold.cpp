#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tclust/errors.hpp"
#include "tclust/manifold.hpp"
#include "tclust/objective.hpp"

using namespace tclust;

namespace {

MultinomialPoint row(double a, double b) {
  Matrix u(1, 2);
  u << a, b;
  return MultinomialPoint(u);
}

Matrix row_mat(double a, double b) {
  Matrix z(1, 2);
  z << a, b;
  return z;
}

double max_row_sum_error(const Matrix &m, double target) {
  return (m.rowwise().sum().array() - target).abs().maxCoeff();
}

} // namespace

TEST(MultinomialPoint, RejectsInvalidMatrices) {
  EXPECT_THROW(MultinomialPoint(Matrix(0, 2)), DimensionError);
  EXPECT_THROW(MultinomialPoint(row_mat(1.0, 0.0)), ValidationError);
  EXPECT_THROW(MultinomialPoint(row_mat(0.7, 0.7)), ValidationError);
  EXPECT_THROW(MultinomialPoint(row_mat(1.5, -0.5)), ValidationError);
  EXPECT_NO_THROW(MultinomialPoint(row_mat(0.25, 0.75)));
}

TEST(Metric, ZeroSymmetricAndHandValue) {
  const auto u = random_point(4, 3, 1);
  const Matrix zero = Matrix::Zero(4, 3);
  const auto xi = random_tangent(u, 2);
  const auto eta = random_tangent(u, 3);
  EXPECT_EQ(metric(u, zero, xi), 0.0);
  EXPECT_DOUBLE_EQ(metric(u, xi, eta), metric(u, eta, xi));
  EXPECT_NEAR(metric(row(0.5, 0.5), row_mat(0.1, -0.1), row_mat(0.1, -0.1)), 0.04,
              1e-15);
  EXPECT_THROW(metric(u, Matrix::Zero(3, 3), xi), DimensionError);
}

TEST(Metric, BilinearAndPositive) {
  const auto u = random_point(5, 4, 4);
  const auto a = random_tangent(u, 5), b = random_tangent(u, 6),
             c = random_tangent(u, 7);
  EXPECT_NEAR(metric(u, 2.0 * a - 3.0 * b, c),
              2.0 * metric(u, a, c) - 3.0 * metric(u, b, c), 1e-12);
  EXPECT_GT(metric(u, a, a), 0.0);
}

TEST(Project, HandExampleAndSpecialCases) {
  const Matrix p = project(row(0.5, 0.5), row_mat(1.0, 0.0));
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p(0, 1), -0.5, 1e-15);

  const auto u = random_point(6, 3, 8);
  const Matrix tangent = random_tangent(u, 9);
  EXPECT_LE((project(u, tangent) - tangent).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(project(u, u.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Project, IdempotentAndFisherOrthogonal) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_point(7, 4, 100 + s);
    const Matrix z = oracle::random_matrix(7, 4, 200 + s);
    const Matrix p = project(u, z);
    EXPECT_LE(max_row_sum_error(p, 0.0), 1e-12);
    EXPECT_LE((project(u, p) - p).cwiseAbs().maxCoeff(), 1e-12);
    for (std::uint64_t j = 0; j < 5; ++j) {
      const auto xi = random_tangent(u, 300 + 10 * s + j);
      EXPECT_LE(std::abs(metric(u, z - p, xi)), 1e-10);
    }
  }
}

TEST(Retract, ZeroStepIsExact) {
  const auto u = random_point(5, 3, 10);
  const auto xi = random_tangent(u, 11);
  EXPECT_EQ(retract(u, xi, 0.0).matrix(), u.matrix());
  EXPECT_EQ(retract(u, Matrix::Zero(5, 3), 1.0).matrix(), u.matrix());
}

TEST(Retract, HandExample) {
  // softmax(log 0.5 + 0.2, log 0.5 - 0.2) = 1 / (1 + e^{-0.4})
  const auto r = retract(row(0.5, 0.5), row_mat(0.1, -0.1), 1.0);
  EXPECT_NEAR(r.matrix()(0, 0), 0.598687660112452, 1e-12);
  EXPECT_NEAR(r.matrix()(0, 1), 0.401312339887548, 1e-12);
}

TEST(Retract, ProducesValidPoints) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = random_point(8, 5, 400 + s);
    const auto xi = random_tangent(u, 500 + s);
    for (double t : {-3.0, 0.3, 1.0, 10.0}) {
      const auto r = retract(u, xi, t);
      EXPECT_LE(max_row_sum_error(r.matrix(), 1.0), 1e-12);
      EXPECT_GT(r.matrix().minCoeff(), 0.0);
    }
  }
}

TEST(Retract, LargeExponentsStayFinite) {
  const auto u = random_point(3, 4, 12);
  Matrix xi = random_tangent(u, 13);
  const double scale = 700.0 / (xi.array() / u.matrix().array()).abs().maxCoeff();
  const auto r = retract(u, xi, scale);
  EXPECT_TRUE(r.matrix().allFinite());
  EXPECT_LE(max_row_sum_error(r.matrix(), 1.0), 1e-12);
  EXPECT_GT(r.matrix().minCoeff(), 0.0);
}

TEST(Retract, RejectsNonFiniteInput) {
  const auto u = random_point(2, 2, 14);
  Matrix xi = Matrix::Zero(2, 2);
  xi(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(retract(u, xi, 1.0), NumericalError);
  EXPECT_THROW(retract(u, Matrix::Zero(2, 2), INFINITY), NumericalError);
}

TEST(Rgrad, ConstantAndZeroGradientsVanish) {
  const auto u = random_point(6, 3, 15);
  EXPECT_LE(egrad_to_rgrad(u, Matrix::Constant(6, 3, 2.5)).cwiseAbs().maxCoeff(),
            1e-14);
  EXPECT_EQ(egrad_to_rgrad(u, Matrix::Zero(6, 3)), Matrix::Zero(6, 3));
}

TEST(Rgrad, RieszRepresentation) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto u = random_point(6, 4, 600 + s);
    const Matrix g = oracle::random_matrix(6, 4, 700 + s);
    const Matrix grad = egrad_to_rgrad(u, g);
    for (std::uint64_t j = 0; j < 10; ++j) {
      const auto xi = random_tangent(u, 800 + 10 * s + j);
      const double euclid = (g.array() * xi.array()).sum();
      EXPECT_LE(oracle::rel_err(metric(u, grad, xi), euclid), 1e-10);
    }
  }
}

TEST(Rgrad, DirectionalDerivativeAlongRetraction) {
  const ObjectiveInstance f(oracle::random_matrix(9, 6, 16));
  const auto u = random_point(9, 3, 17);
  const Matrix grad = egrad_to_rgrad(u, f.egrad(u.matrix()));
  for (std::uint64_t j = 0; j < 10; ++j) {
    const auto xi = random_tangent(u, 900 + j);
    const double fd = oracle::central_diff(
        [&](double t) { return f.value(retract(u, xi, t).matrix()); }, 1e-6);
    EXPECT_LE(oracle::rel_err(fd, metric(u, grad, xi)), 1e-4);
  }
}

TEST(Rhess, ZeroAndLinear) {
  const auto u = random_point(5, 3, 18);
  const Matrix g = oracle::random_matrix(5, 3, 19);
  const Matrix zero = Matrix::Zero(5, 3);
  EXPECT_EQ(ehess_to_rhess(u, g, zero, zero), zero);

  const ObjectiveInstance f(oracle::random_matrix(5, 4, 20));
  const auto eval = f.evaluate(u.matrix());
  const Matrix eg = eval.egrad();
  const auto xi = random_tangent(u, 21), eta = random_tangent(u, 22);
  const double a = 0.7, b = -1.3;
  const Matrix lhs = ehess_to_rhess(u, eg, eval.dgrad(a * xi + b * eta), a * xi + b * eta);
  const Matrix rhs = a * ehess_to_rhess(u, eg, eval.dgrad(xi), xi) +
                     b * ehess_to_rhess(u, eg, eval.dgrad(eta), eta);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, rhs.norm()));
  EXPECT_LE(max_row_sum_error(lhs, 0.0), 1e-12);
}

TEST(Rhess, SelfAdjointUnderFisherMetric) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ObjectiveInstance f(oracle::random_matrix(8, 5, 1000 + s));
    const auto u = random_point(8, 3, 1100 + s);
    const auto eval = f.evaluate(u.matrix());
    const Matrix eg = eval.egrad();
    const auto xi = random_tangent(u, 1200 + s), eta = random_tangent(u, 1300 + s);
    const double a = metric(u, ehess_to_rhess(u, eg, eval.dgrad(xi), xi), eta);
    const double b = metric(u, ehess_to_rhess(u, eg, eval.dgrad(eta), eta), xi);
    EXPECT_LE(std::abs(a - b), 1e-8 * std::max(1.0, std::abs(a)));
  }
}

TEST(Rhess, MatchesDifferencedGradientPlusConnection) {
  const ObjectiveInstance f(oracle::random_matrix(7, 5, 23));
  const auto u = random_point(7, 3, 24);
  const auto xi = random_tangent(u, 25);
  const auto rgrad = [&](double t) {
    const auto p = retract(u, xi, t);
    return Matrix(egrad_to_rgrad(p, f.egrad(p.matrix())));
  };
  const double h = 1e-5;
  const Matrix dgrad_fd = (rgrad(h) - rgrad(-h)) / (2.0 * h);
  const Matrix grad = rgrad(0.0);
  const Matrix oracle_hess = project(
      u, dgrad_fd - 0.5 * (xi.array() * grad.array() / u.matrix().array()).matrix());
  const auto eval = f.evaluate(u.matrix());
  const Matrix hess = ehess_to_rhess(u, eval.egrad(), eval.dgrad(xi), xi);
  EXPECT_LE(oracle::rel_err(hess, oracle_hess), 1e-6);
}

TEST(RandomPoint, DeterministicAndValid) {
  EXPECT_EQ(random_point(4, 3, 7).matrix(), random_point(4, 3, 7).matrix());
  EXPECT_NE(random_point(4, 3, 7).matrix(), random_point(4, 3, 8).matrix());
  const auto one = random_point(5, 1, 3);
  EXPECT_EQ(one.matrix(), Matrix::Ones(5, 1));
  EXPECT_EQ(random_tangent(one, 4), Matrix::Zero(5, 1));
  EXPECT_THROW(random_point(0, 2, 1), DimensionError);
}

TEST(RandomTangent, UnitNormAndTangent) {
  const auto u = random_point(6, 4, 26);
  const auto xi = random_tangent(u, 27);
  EXPECT_EQ(xi, random_tangent(u, 27));
  EXPECT_NEAR(metric_norm(u, xi), 1.0, 1e-12);
  EXPECT_LE(max_row_sum_error(xi, 0.0), 1e-12);
}
