#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "sigsde/scores/scores.hpp"
#include "test_util.hpp"

using namespace sigsde;

namespace {

const SolverConfig kCfg{1, SolverConfig::Scheme::order2};

PathBatch random_batch(std::uint64_t seed, std::size_t n, std::size_t L, std::size_t d, double step) {
  std::mt19937_64 rng(seed);
  std::vector<Path> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(test::gaussian_path(rng, L, d, step));
  return PathBatch(std::move(v));
}

double k(const Path& a, const Path& b, const StaticKernel& sk) { return kernel_eval(a, b, sk, kCfg); }

}  // namespace

TEST(ScoreUnbiased, TwoSampleAlgebra) {
  const auto X = random_batch(1, 2, 6, 2, 0.4);
  const auto y = random_batch(2, 1, 6, 2, 0.4)[0];
  const auto sk = StaticKernel::rbf(1.0);
  const double expect = k(X[0], X[1], sk) - k(X[0], y, sk) - k(X[1], y, sk);
  EXPECT_NEAR(score_unbiased(X, y, sk, kCfg).value, expect, 1e-12);
}

TEST(ScoreUnbiased, ConstantPathsGiveMinusOne) {
  const Path c(TimeGrid::uniform(0, 1, 4), Matrix::Constant(4, 2, 0.7));
  const PathBatch X({c, c, c});
  EXPECT_DOUBLE_EQ(score_unbiased(X, c, StaticKernel::linear(), kCfg).value, -1.0);
}

TEST(ScoreUnbiased, PermutationInvariantAndMatchesGram) {
  const auto X = random_batch(3, 5, 6, 2, 0.5);
  const auto y = random_batch(4, 1, 6, 2, 0.5)[0];
  const auto sk = StaticKernel::se_t_sqr(1.2);
  const double v = score_unbiased(X, y, sk, kCfg).value;
  EXPECT_NEAR(score_unbiased(X.select({4, 2, 0, 3, 1}), y, sk, kCfg).value, v, 1e-12);
  const Matrix Kxx = gram(X, X, sk, kCfg).entries;
  Vector kxy(5);
  for (std::size_t i = 0; i < 5; ++i) kxy(static_cast<Eigen::Index>(i)) = k(X[i], y, sk);
  EXPECT_NEAR(score_unbiased_from_gram(Kxx, kxy), v, 1e-12);
}

TEST(ScoreUnbiased, RejectsSingleSample) {
  const auto X = random_batch(5, 1, 4, 1, 1.0);
  EXPECT_THROW(score_unbiased(X, X[0], StaticKernel::linear(), kCfg), Error);
}

TEST(ScoreUnbiased, SubsampleMeanMatchesPopulationPlugIn) {
  const std::size_t N = 40, m = 8, draws = 200;
  const auto pop = random_batch(6, N, 5, 2, 0.5);
  const Path y = random_batch(7, 1, 5, 2, 0.5)[0];
  const auto sk = StaticKernel::rbf(1.0);
  const Matrix K = gram(pop, pop, sk, kCfg).entries;
  Vector ky(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) ky(static_cast<Eigen::Index>(i)) = k(pop[i], y, sk);
  const double truth = offdiag_mean(K) - 2.0 * ky.mean();

  std::mt19937_64 rng(8);
  std::vector<std::size_t> idx(N);
  std::vector<double> est;
  for (std::size_t r = 0; r < draws; ++r) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    Matrix Ks(m, m);
    Vector ks(m);
    for (std::size_t a = 0; a < m; ++a) {
      ks(static_cast<Eigen::Index>(a)) = ky(static_cast<Eigen::Index>(idx[a]));
      for (std::size_t b = 0; b < m; ++b)
        Ks(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            K(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
    }
    est.push_back(score_unbiased_from_gram(Ks, ks));
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / draws;
  double var = 0;
  for (double e : est) var += (e - mean) * (e - mean);
  var /= draws - 1;
  EXPECT_LE(std::abs(mean - truth), 3 * std::sqrt(var / draws));
}

TEST(Mmd, SymmetricAndZeroCases) {
  const auto X = random_batch(9, 4, 5, 2, 0.5);
  const auto Y = random_batch(10, 5, 5, 2, 0.5);
  const auto sk = StaticKernel::rbf(0.8);
  EXPECT_NEAR(mmd_sq_unbiased(X, Y, sk, kCfg), mmd_sq_unbiased(Y, X, sk, kCfg), 1e-12);
  const Matrix Kxx = gram(X, X, sk, kCfg).entries;
  EXPECT_NEAR(mmd_sq_biased_from_gram(Kxx, Kxx, Kxx), 0.0, 1e-14);
  const double same = mmd_sq_unbiased(X, X, sk, kCfg);
  // Same batch: 2 (off-diagonal mean - full mean), negative since the diagonal dominates.
  EXPECT_NEAR(same, 2 * (offdiag_mean(Kxx) - Kxx.mean()), 1e-12);
  EXPECT_LT(same, 0.0);
  const Path c(TimeGrid::uniform(0, 1, 5), Matrix::Constant(5, 2, 1.0));
  EXPECT_DOUBLE_EQ(mmd_sq_unbiased(PathBatch({c, c}), PathBatch({c, c, c}), sk, kCfg), 0.0);
  EXPECT_THROW(mmd_sq_unbiased(PathBatch({c}), Y, sk, kCfg), Error);
}

TEST(LossUnconditional, PlusRealTermIsMmd) {
  const auto X = random_batch(11, 4, 5, 2, 0.5);
  const auto Y = random_batch(12, 3, 5, 2, 0.5);
  const auto sk = StaticKernel::se_t_id(1.0);
  const auto spec = KernelSpec::single(sk, kCfg);
  EXPECT_NEAR(loss_unconditional(X, Y, spec).value + real_real_term(Y, spec), mmd_sq_unbiased(X, Y, sk, kCfg),
              1e-12);
  // Mean of per-target scores.
  double mean = 0;
  for (const auto& y : Y) mean += score_unbiased(X, y, sk, kCfg).value / 3.0;
  EXPECT_NEAR(loss_unconditional(X, Y, spec).value, mean, 1e-12);
  EXPECT_NEAR(loss_unconditional(X, PathBatch({Y[1]}), spec).value, score_unbiased(X, Y[1], sk, kCfg).value, 1e-14);
}

TEST(LossUnconditional, ScaledTermsSum) {
  const auto X = random_batch(13, 3, 5, 2, 0.5);
  const auto Y = random_batch(14, 2, 5, 2, 0.5);
  KernelSpec spec{{{1.0, StaticKernel::rbf(1.0)}, {2.5, StaticKernel::linear()}}, kCfg};
  const double v = loss_unconditional(X, Y, spec).value;
  const auto sc = [](const PathBatch& b) { return map_batch(b, [](const Path& p) { return scale(p, 2.5); }); };
  const double expect = loss_unconditional(X, Y, StaticKernel::rbf(1.0), kCfg).value +
                        loss_unconditional(sc(X), sc(Y), StaticKernel::linear(), kCfg).value;
  EXPECT_NEAR(v, expect, 1e-12);
}

TEST(LossUnconditional, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  std::vector<Path> xs, ys;
  for (int i = 0; i < 3; ++i) xs.push_back(time_augment(test::gaussian_path(rng, 5, 1, 0.5)));
  for (int i = 0; i < 2; ++i) ys.push_back(time_augment(test::gaussian_path(rng, 5, 1, 0.5)));
  const PathBatch X(xs), Y(ys);
  KernelSpec spec{{{1.0, StaticKernel::rbf(0.9)}, {0.5, StaticKernel::se_t_sqr(1.0)}}, kCfg};
  const auto g = *loss_unconditional(X, Y, spec, true).gradient_wrt_generated;
  ASSERT_EQ(g.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    auto f = [&](const Matrix& v) {
      std::vector<Path> xp(xs);
      xp[i] = Path(xs[i].grid(), v, true);
      return loss_unconditional(PathBatch(xp), Y, spec).value;
    };
    Matrix fd = test::fd_gradient(f, xs[i].values());
    fd.col(0).setZero();
    EXPECT_LT(test::rel_err(g[i], fd), 1e-4) << i;
    EXPECT_TRUE(g[i].col(0).isZero());
  }
}

TEST(LossConditional, DegenerateConditioningReducesToScores) {
  const auto X = random_batch(16, 4, 5, 2, 0.5);
  const auto Y = random_batch(17, 2, 5, 2, 0.5);
  const auto spec = KernelSpec::single(StaticKernel::rbf(1.0), kCfg);
  std::vector<ConditionalPair> pairs{{Y[0], Y[0]}, {Y[1], Y[1]}};
  ConditionalSampler ignore = [&](const Path&, std::size_t, std::size_t m) {
    EXPECT_EQ(m, 4u);
    return X;
  };
  const auto v = loss_conditional(pairs, ignore, 4, spec, true);
  EXPECT_NEAR(v.value, loss_unconditional(X, Y, spec).value, 1e-12);
  EXPECT_EQ(v.gradient_wrt_generated->size(), 8u);
  const auto one = loss_conditional({pairs[1]}, ignore, 4, spec);
  EXPECT_NEAR(one.value, score_unbiased(X, Y[1], spec).value, 1e-14);
  EXPECT_THROW(loss_conditional(pairs, ignore, 1, spec), Error);
}

TEST(PermutationTest, SeparatesAndAcceptsIdentical) {
  const auto X = random_batch(18, 12, 5, 1, 0.3);
  std::vector<Path> shifted;
  std::mt19937_64 r2(19);
  for (int i = 0; i < 12; ++i) shifted.push_back(test::gaussian_path(r2, 5, 1, 1.5));
  const auto sk = StaticKernel::rbf(1.0);
  Rng rng = make_rng(20);
  const auto sep = mmd_permutation_test(X, PathBatch(shifted), sk, kCfg, 200, 0.05, rng);
  EXPECT_TRUE(sep.reject);
  EXPECT_GT(sep.statistic, 0.0);
  const auto same = mmd_permutation_test(X, X, sk, kCfg, 200, 0.05, rng);
  EXPECT_FALSE(same.reject);
  EXPECT_NEAR(same.statistic, 0.0, 1e-14);
}
