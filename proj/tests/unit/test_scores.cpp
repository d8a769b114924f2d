#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ndgan/data.hpp"
#include "ndgan/error.hpp"
#include "ndgan/scores.hpp"

using namespace ndgan;

namespace {

Tensor col(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::matrix(n, 1, std::move(v));
}

// Brute-force kNN score straight from the definition.
double knn_oracle(std::span<const double> x, const Tensor& ref, std::size_t k) {
  const auto dist = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const auto nearest = [&](std::span<const double> q, std::optional<std::size_t> skip) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < ref.rows(); ++j)
      if (j != skip) d.emplace_back(dist(q, ref.row(j)), j);
    std::sort(d.begin(), d.end());
    d.resize(k);
    return d;
  };
  const auto nx = nearest(x, std::nullopt);
  const std::size_t anchor = nx.back().second;
  const auto na = nearest(ref.row(anchor), anchor);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    num += nx[i].first / static_cast<double>(k);
    den += na[i].first / static_cast<double>(k);
  }
  return num / den;
}

Tensor probs_rows(std::vector<std::vector<double>> rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return Tensor::matrix(rows.size(), rows.front().size(), std::move(v));
}

// 15 x 15 cells of cell-averaged density; midpoint values understate the mass
// of low-density cells on the flank of a component.
GridDensity ring_grid(const GaussianMixtureDensity& ring) {
  return coarsen_grid(discretize(as_density(ring), {-3.0, -3.0}, {3.0, 3.0}, {150, 150}), 10);
}

}  // namespace

TEST(NdGanRatio, Examples) {
  EXPECT_EQ(nd_gan_ratio(0.5), 1.0);
  EXPECT_NEAR(nd_gan_ratio(0.8), 4.0, 1e-12);
  EXPECT_GT(nd_gan_ratio(0.0), 0.0);
  EXPECT_NEAR(nd_gan_ratio(0.0), 1e-7, 1e-13);
  EXPECT_TRUE(std::isfinite(nd_gan_ratio(1.0)));
}

TEST(NdGanRatio, StrictlyIncreasingOverSweep) {
  double prev = nd_gan_ratio(1e-7);
  for (int i = 1; i <= 10000; ++i) {
    const double p = 1e-7 + (1.0 - 2e-7) * i / 10000.0;
    const double s = nd_gan_ratio(p);
    EXPECT_GT(s, prev) << p;
    EXPECT_GT(s, 0.0);
    prev = s;
  }
}

TEST(NdGanRatio, FromProbabilityRows) {
  const auto s = score_nd_gan_from_probs(probs_rows({{0.3, 0.2, 0.5}, {0.1, 0.1, 0.8}}));
  EXPECT_EQ(s[0], 1.0);
  EXPECT_NEAR(s[1], 4.0, 1e-12);
}

TEST(Entropy, ExamplesAndBounds) {
  std::vector<double> uniform10(10, 0.1);
  const auto s = score_entropy(probs_rows({{1.0, 0.0}, {0.5, 0.5}}));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], std::log(2.0), 1e-15);
  EXPECT_NEAR(score_entropy(probs_rows({uniform10}))[0], std::log(10.0), 1e-12);

  Rng rng(1);
  std::gamma_distribution<double> g(0.3, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(5);
    double total = 0.0;
    for (double& x : p) total += (x = g(rng) + 1e-12);
    for (double& x : p) x /= total;
    const double h = score_entropy(probs_rows({p}))[0];
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(5.0) + 1e-12);
  }
}

TEST(Entropy, RejectsBadRows) {
  EXPECT_THROW(score_entropy(probs_rows({{0.6, 0.6}})), Error);
  EXPECT_THROW(score_entropy(probs_rows({{1.2, -0.2}})), Error);
  EXPECT_THROW(score_max_prob(probs_rows({{0.5, 0.4}})), Error);
}

TEST(MaxProb, ExamplesAndBounds) {
  std::vector<double> uniform10(10, 0.1);
  const auto s = score_max_prob(probs_rows({{0.0, 1.0, 0.0}, {0.7, 0.2, 0.1}}));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], 0.3, 1e-15);
  EXPECT_NEAR(score_max_prob(probs_rows({uniform10}))[0], 0.9, 1e-15);
}

TEST(RealClassProbs, DropsFakeAndRenormalizes) {
  const Tensor p = real_class_probs(probs_rows({{0.2, 0.6, 0.2}}));
  EXPECT_EQ(p.shape(), (Shape{1, 2}));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Knn, HandTraces) {
  const Tensor ref = col({0.0, 1.0, 10.0});
  const auto s = score_knn(col({2.0, 20.0, 1.0}), ref, 1);
  EXPECT_EQ(s[0], 1.0);
  EXPECT_NEAR(s[1], 10.0 / 9.0, 1e-15);
  EXPECT_EQ(s[2], 0.0);
  EXPECT_THROW(score_knn(col({2.0}), ref, 3), Error);
  EXPECT_THROW(score_knn(col({2.0}), ref, 0), Error);
  EXPECT_THROW(score_knn(Tensor::matrix(1, 2, {0.0, 0.0}), ref, 1), Error);
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng(3);
  std::normal_distribution<double> g;
  for (std::size_t k : {1u, 2u, 5u}) {
    std::vector<double> r(60 * 3), q(20 * 3);
    for (double& x : r) x = g(rng);
    for (double& x : q) x = 2.0 * g(rng);
    const Tensor ref = Tensor::matrix(60, 3, r), query = Tensor::matrix(20, 3, q);
    const auto s = score_knn(query, ref, k);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(s[i], knn_oracle(query.row(i), ref, k), 1e-12) << "k=" << k;
  }
}

TEST(Knn, ZeroDenominator) {
  // Duplicated reference point: the anchor's nearest other point is at distance 0.
  const Tensor ref = col({0.0, 0.0, 5.0, 9.0});
  const auto s = score_knn(col({0.0, 1.0, 7.5}), ref, 1);
  EXPECT_EQ(s[0], 0.0);
  // 7.5 -> anchor 9 (tie broken by distance 1.5 < 2.5), denominator 4.
  EXPECT_EQ(s[2], 1.5 / 4.0);
  // 1.0 -> anchor 0 with denominator 0: takes the largest finite score in the batch.
  EXPECT_EQ(s[1], s[2]);
  for (double v : s) EXPECT_TRUE(std::isfinite(v));
}

TEST(UniformBaseline, SupportMeanDeterminism) {
  const auto gen = make_uniform_baseline_generator({0.0, 0.0}, {1.0, 1.0});
  Rng a(5), b(5);
  const Tensor x = gen.sample(10000, a);
  EXPECT_EQ(x.storage(), gen.sample(10000, b).storage());
  double mean = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
    mean += x.row(i)[0] / 10000.0;
  }
  EXPECT_NEAR(mean, 0.5, 0.02);
  EXPECT_THROW(make_uniform_baseline_generator({1.0}, {1.0}), Error);
  EXPECT_THROW(make_uniform_baseline_generator({0.0}, {INFINITY}), Error);

  const auto box = make_uniform_baseline_generator(Tensor::matrix(3, 2, {0.0, -1.0, 2.0, 4.0, 1.0, 0.0}));
  EXPECT_EQ(box.lower(), (std::vector<double>{0.0, -1.0}));
  EXPECT_EQ(box.upper(), (std::vector<double>{2.0, 4.0}));
  Rng c(1);
  EXPECT_EQ(box.sampler()(4, c).shape(), (Shape{4, 2}));
}

TEST(MixtureCheck, DataSamplesDoNotQualify) {
  const auto ring = ring_density(8, 2.0, 0.2);
  const GridDensity grid = ring_grid(ring);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto r = check_mixture_generator(ring.sample(10000, rng), grid, 0.01 * grid.max_value());
    EXPECT_FALSE(r.holds) << "seed " << seed << " cells " << r.cells.size();
  }
}

TEST(MixtureCheck, UniformAndContaminatedSamplesQualify) {
  const auto ring = ring_density(8, 2.0, 0.2);
  const GridDensity grid = ring_grid(ring);
  const double eps = 0.01 * grid.max_value();
  Rng rng(4);
  const auto uniform = make_uniform_baseline_generator({-3.0, -3.0}, {3.0, 3.0});
  const auto r = check_mixture_generator(uniform.sample(10000, rng), grid, eps);
  EXPECT_TRUE(r.holds);
  EXPECT_TRUE(r.region_holds);
  EXPECT_FALSE(r.cells.empty());
  for (const auto& c : r.cells) {
    EXPECT_LE(c.p_data, eps);
    EXPECT_GT(c.p_generator - c.p_data, 3.0 * c.standard_error);
  }

  const Tensor clean = ring.sample(9000, rng);
  const Tensor extra = uniform.sample(1000, rng);
  std::vector<double> v = clean.storage();
  v.insert(v.end(), extra.values().begin(), extra.values().end());
  const auto mixed = check_mixture_generator(Tensor::matrix(10000, 2, v), grid, eps);
  EXPECT_TRUE(mixed.holds);
  // About 0.1 of the samples land where p_data carries almost no mass.
  EXPECT_GT(mixed.region_sample_fraction - mixed.region_data_mass, 0.05);
}

TEST(MixtureCheck, Errors) {
  const GridDensity grid = discretize(as_density(ring_density(4, 1.0, 0.2)), {-2.0, -2.0}, {2.0, 2.0}, {10, 10});
  EXPECT_THROW(check_mixture_generator(Tensor::zeros({0, 2}), grid, 0.1), Error);
  EXPECT_THROW(check_mixture_generator(Tensor::zeros({5, 2}), grid, 0.0), Error);
  EXPECT_THROW(check_mixture_generator(Tensor::zeros({5, 3}), grid, 0.1), Error);
  const auto r = check_mixture_generator(Tensor::matrix(2, 2, {0.0, 0.0, 9.0, 9.0}), grid, 0.1);
  EXPECT_EQ(r.outside_grid, 1u);
}

TEST(Scorer, NamesValidationAndDirection) {
  EXPECT_EQ(parse_score_kind("nd-gan-ratio"), ScoreKind::nd_gan_ratio);
  EXPECT_EQ(std::string(to_string(ScoreKind::max_prob)), "max-prob");
  EXPECT_THROW(parse_score_kind("ocsvm"), Error);

  Rng init(2);
  auto gan = std::make_shared<const GanModel>(make_gan(GanArchitecture::toy(2, 3), init));
  const NoveltyScorer nd = make_gan_scorer(ScoreKind::nd_gan_ratio, gan);
  EXPECT_EQ(nd.name(), "nd-gan-ratio");
  const Tensor x = Tensor::matrix(2, 2, {0.0, 0.0, 1.0, -1.0});
  const auto s = nd.score(x);
  const Tensor p = discriminator_probs(*gan, x);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s[i], nd_gan_ratio(p.row(i)[3]), 1e-15);

  const NoveltyScorer fake = make_gan_scorer(ScoreKind::fake_prob, gan);
  EXPECT_NEAR(fake.score(x)[0], p.row(0)[3], 1e-15);

  const NoveltyScorer knn = make_knn_scorer(5, Tensor::matrix(6, 2, {0, 0, 1, 0, 0, 1, 1, 1, 2, 2, 3, 3}), gan);
  EXPECT_EQ(knn.name(), "5-nn");
  EXPECT_EQ(knn.reference->cols(), 64u);
  EXPECT_THROW(make_knn_scorer(6, Tensor::matrix(6, 1, {0, 1, 2, 3, 4, 5})), Error);

  NoveltyScorer empty;
  empty.kind = ScoreKind::entropy;
  EXPECT_THROW(empty.validate(), Error);
}

TEST(Scorer, CsvOutput) {
  const std::vector<ScoredExample> rows{{0, 0.5, true}, {1, 2.0, false}, {2, 1.0, std::nullopt}};
  std::ostringstream os;
  write_scores_csv(os, rows);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "example_id,score,is_novel");
  EXPECT_NE(text.find("0,0.5,1\n"), std::string::npos) << text;
  EXPECT_NE(text.find("1,2,0\n"), std::string::npos) << text;
  EXPECT_NE(text.find("2,1,\n"), std::string::npos) << text;
}
