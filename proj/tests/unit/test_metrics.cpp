#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ndgan/error.hpp"
#include "ndgan/metrics.hpp"
#include "ndgan/rng.hpp"

using namespace ndgan;

namespace {

// Probability that a random novel example outscores a random nominal one, ties half.
double pairwise_auroc(const std::vector<double>& nominal, const std::vector<double>& novel) {
  double wins = 0.0;
  for (double p : novel)
    for (double n : nominal) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / static_cast<double>(nominal.size() * novel.size());
}

std::pair<std::vector<double>, std::vector<double>> random_sets(Rng& rng) {
  std::uniform_int_distribution<int> size(1, 50), level(0, 9);
  std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
  // Integer levels force ties that survive exact transforms.
  for (double& x : a) x = level(rng);
  for (double& x : b) x = level(rng) + level(rng);
  return {a, b};
}

}  // namespace

TEST(Auroc, SpecExamples) {
  EXPECT_EQ(roc_auroc(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}).auroc, 1.0);
  // Only 0.8 > 0.2 of the four novel-over-nominal pairs is ordered; the 3-of-4
  // reading holds with the roles swapped.
  EXPECT_EQ(roc_auroc(std::vector<double>{0.2, 0.9}, std::vector<double>{0.1, 0.8}).auroc, 0.25);
  EXPECT_EQ(roc_auroc(std::vector<double>{0.1, 0.8}, std::vector<double>{0.2, 0.9}).auroc, 0.75);
  EXPECT_EQ(roc_auroc(std::vector<double>{3, 3, 3}, std::vector<double>{3, 3}).auroc, 0.5);
}

TEST(Auroc, SingleClassIsAnError) {
  try {
    roc_auroc(std::vector<double>{1, 2}, std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
  }
  std::vector<ScoredExample> s{{0, 1.0, true}, {1, 2.0, std::nullopt}};
  EXPECT_THROW(roc_auroc(s), Error);
  EXPECT_THROW(roc_auroc(std::vector<double>{1}, std::vector<double>{NAN}), Error);
}

TEST(Auroc, EqualsPairwiseOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [a, b] = random_sets(rng);
    EXPECT_LT(std::abs(roc_auroc(a, b).auroc - pairwise_auroc(a, b)), 1e-12);
  }
}

TEST(Auroc, CurveInvariants) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [a, b] = random_sets(rng);
    const RocCurve roc = roc_auroc(a, b);
    ASSERT_GE(roc.points.size(), 2u);
    EXPECT_EQ(roc.points.front().fpr, 0.0);
    EXPECT_EQ(roc.points.front().tpr, 0.0);
    EXPECT_EQ(roc.points.back().fpr, 1.0);
    EXPECT_EQ(roc.points.back().tpr, 1.0);
    double area = 0.0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      const auto &p = roc.points[i - 1], &q = roc.points[i];
      EXPECT_LE(p.fpr, q.fpr);
      EXPECT_LE(p.tpr, q.tpr);
      EXPECT_GT(p.threshold, q.threshold);
      area += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
    }
    EXPECT_NEAR(area, roc.auroc, 1e-12);
    EXPECT_GE(roc.auroc, 0.0);
    EXPECT_LE(roc.auroc, 1.0);
  }
}

TEST(Auroc, InvariantUnderIncreasingTransforms) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto [a, b] = random_sets(rng);
    const double base = roc_auroc(a, b).auroc;
    auto ea = a, eb = b, fa = a, fb = b;
    for (double& x : ea) x = std::exp(x);
    for (double& x : eb) x = std::exp(x);
    for (double& x : fa) x = 3.0 * x - 7.0;
    for (double& x : fb) x = 3.0 * x - 7.0;
    EXPECT_EQ(roc_auroc(ea, eb).auroc, base);
    EXPECT_EQ(roc_auroc(fa, fb).auroc, base);
  }
}

TEST(Auroc, ReversingLabelsGivesComplement) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [a, b] = random_sets(rng);
    EXPECT_NEAR(roc_auroc(b, a).auroc, 1.0 - roc_auroc(a, b).auroc, 1e-15);
  }
}

TEST(Auroc, TprAtFpr) {
  const RocCurve roc = roc_auroc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, std::vector<double>{0.35, 0.5, 0.6, 0.05});
  EXPECT_EQ(roc.tpr_at_fpr(0.0), 0.5);
  EXPECT_EQ(roc.tpr_at_fpr(0.25), 0.75);
  EXPECT_EQ(roc.tpr_at_fpr(1.0), 1.0);
}

TEST(Threshold, SpecExamples) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_EQ(threshold_at_fpr(s, 0.25), 3.0);
  EXPECT_EQ(exceedance_rate(s, 3.0), 0.25);
  const std::vector<double> sym{-2, -1, 0, 1, 2};
  EXPECT_EQ(threshold_at_fpr(sym, 0.5), 0.0);
  EXPECT_THROW(threshold_at_fpr(s, 0.1), Error);
  EXPECT_THROW(threshold_at_fpr(s, 0.0), Error);
  EXPECT_THROW(threshold_at_fpr(std::vector<double>{}, 0.5), Error);
}

TEST(Threshold, EmpiricalFprWithinBudget) {
  Rng rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(20 + trial));
    for (double& x : s) x = std::round(g(rng) * 4.0);  // ties
    for (double alpha : {0.05, 0.1, 0.5}) {
      if (static_cast<double>(s.size()) * alpha < 1.0) continue;
      EXPECT_LE(exceedance_rate(s, threshold_at_fpr(s, alpha)), alpha);
    }
  }
}

TEST(Spearman, KnownValues) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(a, std::vector<double>{2, 4, 6, 8, 10}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(spearman(a, std::vector<double>{1, 8, 27, 64, 125}), 1.0, 1e-15);
  // Midranks: b ranks {1.5, 1.5, 3, 4, 5}.
  EXPECT_NEAR(spearman(a, std::vector<double>{0, 0, 1, 2, 3}), 0.9746794344808963, 1e-12);
  EXPECT_THROW(spearman(a, std::vector<double>{1}), Error);
}

TEST(RocCsv, HeaderAndRows) {
  std::ostringstream os;
  write_roc_csv(os, roc_auroc(std::vector<double>{0.0}, std::vector<double>{1.0}));
  EXPECT_EQ(os.str().substr(0, 18), "fpr,tpr,threshold\n");
  EXPECT_NE(os.str().find("inf"), std::string::npos);
}
