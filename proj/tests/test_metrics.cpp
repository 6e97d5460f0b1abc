#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tclust/metrics.hpp"

using namespace tclust;

namespace {

std::vector<Label> random_labels(std::size_t n, int classes, std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<Label> out(n);
  for (auto &l : out)
    l = d(rng);
  return out;
}

} // namespace

TEST(KuhnMunkres, SmallCases) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  auto r = kuhn_munkres(a);
  EXPECT_EQ(r.row_to_col, (std::vector<int>{0, 1}));
  EXPECT_EQ(r.cost, 0.0);
  a << 1, 2, 2, 1;
  r = kuhn_munkres(a);
  EXPECT_EQ(r.row_to_col, (std::vector<int>{0, 1}));
  EXPECT_EQ(r.cost, 2.0);
}

TEST(KuhnMunkres, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> d(-20, 20);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix c(5, 5);
    for (Eigen::Index i = 0; i < 25; ++i)
      c.data()[i] = d(rng);
    const auto r = kuhn_munkres(c);
    EXPECT_EQ(r.cost, oracle::min_assignment(c));
    std::vector<int> sorted = r.row_to_col;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4}));
  }
}

TEST(KuhnMunkres, RectangularIsPadded) {
  Matrix c(2, 3);
  c << 5, 1, 9, 2, 8, 7;
  const auto r = kuhn_munkres(c);
  EXPECT_EQ(r.cost, 3.0);
  EXPECT_EQ(r.row_to_col.size(), 3u);
  Matrix bad = c;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(kuhn_munkres(bad), ValidationError);
}

TEST(Accuracy, HandValues) {
  const std::vector<Label> l{0, 0, 1, 1, 2, 2};
  EXPECT_EQ(accuracy(l, l), 1.0);
  EXPECT_EQ(accuracy(l, std::vector<Label>{2, 2, 0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(l, std::vector<Label>{1, 1, 0, 2, 2, 2}), 5.0 / 6.0);
  EXPECT_THROW(accuracy(l, std::vector<Label>{0, 1}), ValidationError);
  EXPECT_THROW(accuracy(std::vector<Label>{}, std::vector<Label>{}), ValidationError);
  EXPECT_THROW(accuracy(std::vector<Label>{-1}, std::vector<Label>{0}), ValidationError);
}

TEST(Accuracy, MatchesExhaustiveMappings) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int kt = 1 + trial % 6, kp = 1 + (trial / 6) % 6;
    const auto t = random_labels(25, kt, rng);
    const auto p = random_labels(25, kp, rng);
    const double ac = accuracy(t, p);
    EXPECT_NEAR(ac, oracle::brute_accuracy(t, p), 1e-15);
    EXPECT_GE(ac, 0.0);
    EXPECT_LE(ac, 1.0);
  }
}

TEST(Nmi, HandValues) {
  const std::vector<Label> l{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(nmi(l, l), 1.0);
  EXPECT_NEAR(nmi(l, std::vector<Label>{0, 1, 0, 1}), 0.0, 1e-15);
  // joint counts (2,0;1,1)/4
  const double mi = 0.5 * std::log2(4.0 / 3.0) + 0.25 * std::log2(2.0 / 3.0) + 0.25;
  EXPECT_NEAR(nmi(l, std::vector<Label>{0, 0, 0, 1}), mi, 1e-15);
  EXPECT_NEAR(nmi(l, std::vector<Label>{0, 0, 0, 1}), 0.3113, 1e-4);
}

TEST(Nmi, DegenerateEntropy) {
  const std::vector<Label> one{3, 3, 3};
  EXPECT_EQ(nmi(one, std::vector<Label>{7, 7, 7}), 1.0);
  EXPECT_EQ(nmi(one, std::vector<Label>{0, 1, 1}), 0.0);
}

TEST(Metrics, RelabelInvarianceSymmetryAndRange) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_labels(40, 4, rng);
    const auto p = random_labels(40, 3, rng);
    std::vector<Label> p2 = p, t2 = t;
    for (auto &l : p2)
      l = 10 + (2 - l) * 3; // injective relabeling
    for (auto &l : t2)
      l = 100 - l;
    EXPECT_DOUBLE_EQ(accuracy(t, p), accuracy(t, p2));
    EXPECT_NEAR(nmi(t, p), nmi(t2, p2), 1e-14);
    EXPECT_NEAR(nmi(t, p), nmi(p, t), 1e-14);
    const double n = nmi(t, p);
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 1.0);
  }
}
