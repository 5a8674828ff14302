#include <gtest/gtest.h>

#include <random>

#include "sigsde/paths/transforms.hpp"
#include "sigsde/sigkernel/gram.hpp"
#include "sigsde/sigkernel/solver.hpp"
#include "sigsde/tsig/signature.hpp"
#include "test_util.hpp"

using namespace sigsde;
using Scheme = SolverConfig::Scheme;

namespace {

SolverConfig cfg(unsigned lambda, Scheme s = Scheme::order2) { return {lambda, s}; }

Path line1d(std::size_t L) {
  std::vector<double> v(L);
  for (std::size_t i = 0; i < L; ++i) v[i] = static_cast<double>(i) / static_cast<double>(L - 1);
  return Path::from_values(TimeGrid::uniform(0, 1, L), v);
}

std::vector<StaticKernel> all_kernels() {
  return {StaticKernel::linear(), StaticKernel::rbf(1.3), StaticKernel::se_t_id(0.9), StaticKernel::se_t_sqr(1.1),
          StaticKernel::se_t_cexp(1.0, 0.7, 3)};
}

}  // namespace

TEST(KernelEval, ConstantPathGivesOne) {
  std::mt19937_64 rng(1);
  Path x(TimeGrid::uniform(0, 1, 5), Matrix::Constant(5, 2, 0.3));
  Path y = test::gaussian_path(rng, 7, 2, 1.0);
  for (const auto& k : all_kernels()) EXPECT_DOUBLE_EQ(kernel_eval(x, y, k, cfg(2)), 1.0);
}

TEST(KernelEval, UnitLinesMatchSeries) {
  const double truth = test::line_kernel_series(1.0);
  EXPECT_NEAR(truth, 2.2795853, 1e-7);
  // Frozen errors of the Order2 stencil on this single cell.
  const std::vector<std::pair<unsigned, double>> frozen{{3, 4.378160197768821e-4}, {4, 1.2422834792769066e-4},
                                                        {5, 3.2857370379613116e-5}};
  for (auto [l, err] : frozen) EXPECT_NEAR(kernel_eval(line1d(2), line1d(2), StaticKernel::linear(), cfg(l)) - truth, err, 1e-9);
  // Extra nodes along the line refine the grid the same way dyadic order does.
  EXPECT_NEAR(kernel_eval(line1d(3), line1d(3), StaticKernel::linear(), cfg(3)) - truth, frozen[1].second, 1e-9);
  for (std::size_t L : {5u, 17u}) EXPECT_NEAR(kernel_eval(line1d(L), line1d(L), StaticKernel::linear(), cfg(4)), truth, 1e-4);
  // Second order: halving the step divides the error by about four.
  Path x = line1d(2);
  double prev = std::abs(kernel_eval(x, x, StaticKernel::linear(), cfg(4)) - truth);
  for (unsigned l = 5; l <= 7; ++l) {
    const double e = std::abs(kernel_eval(x, x, StaticKernel::linear(), cfg(l)) - truth);
    EXPECT_NEAR(prev / e, 4.0, 0.25);
    prev = e;
  }
  // Order1 converges too, more slowly.
  EXPECT_NEAR(kernel_eval(x, x, StaticKernel::linear(), cfg(8, Scheme::order1)), truth, 1e-2);
}

TEST(KernelEval, MatchesTruncatedSignatureOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Path x = test::random_path(rng, 10, 2, 1.0);
    Path y = test::random_path(rng, 14, 2, 1.0);
    const double oracle = truncated_kernel(x, y, 10);
    EXPECT_NEAR(kernel_eval(x, y, StaticKernel::linear(), cfg(3)), oracle, 1e-3);
  }
}

TEST(KernelEval, SymmetricInArguments) {
  std::mt19937_64 rng(3);
  for (const auto& k : all_kernels()) {
    Path x = test::gaussian_path(rng, 9, 3, 0.5);
    Path y = test::gaussian_path(rng, 6, 3, 0.5);
    const double a = kernel_eval(x, y, k, cfg(2)), b = kernel_eval(y, x, k, cfg(2));
    EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
  }
}

TEST(KernelEval, DyadicRefinementConverges) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Path x = test::random_path(rng, 6, 2, 1.5);
    Path y = test::random_path(rng, 6, 2, 1.5);
    double prev_gap = 1e9;
    double prev = kernel_eval(x, y, StaticKernel::linear(), cfg(2));
    for (unsigned l = 3; l <= 6; ++l) {
      const double cur = kernel_eval(x, y, StaticKernel::linear(), cfg(l));
      const double gap = std::abs(cur - prev);
      EXPECT_LT(gap, prev_gap);
      prev_gap = gap;
      prev = cur;
    }
  }
}

TEST(KernelEval, ScalingMatchesTruncatedOracle) {
  std::mt19937_64 rng(5);
  Path x = test::random_path(rng, 8, 2, 1.0);
  Path y = test::random_path(rng, 8, 2, 1.0);
  auto sx = signature(x, 8), sy = signature(y, 8);
  for (double c : {0.1, 0.3, 0.5}) {
    double pred = 0;
    for (std::size_t k = 0; k <= 8; ++k) pred += std::pow(c, 2.0 * static_cast<double>(k)) * level_inner(sx.tensor, sy.tensor, k);
    Path xc(x.grid(), c * x.values()), yc(y.grid(), c * y.values());
    EXPECT_NEAR(kernel_eval(xc, yc, StaticKernel::linear(), cfg(3)), pred, 1e-4);
  }
}

TEST(KernelEval, TruncatedOracleIncreasesInDepthTowardPde) {
  Path x = Path(TimeGrid::uniform(0, 1, 4), (Matrix(4, 2) << 0, 0, 0.2, 0.1, 0.3, 0.4, 0.6, 0.5).finished());
  Path y = Path(TimeGrid::uniform(0, 1, 3), (Matrix(3, 2) << 0, 0, 0.4, 0.1, 0.5, 0.6).finished());
  const double pde = kernel_eval(x, y, StaticKernel::linear(), cfg(5));
  double prev = 0;
  for (std::size_t N = 1; N <= 8; ++N) {
    const double t = truncated_kernel(x, y, N);
    EXPECT_GT(t, prev);
    EXPECT_LT(t, pde + 1e-6);
    prev = t;
  }
  EXPECT_NEAR(prev, pde, 1e-5);
}

TEST(KernelEval, SeTIdLargeSigmaMatchesQuadraticSurrogate) {
  // 1 - |x - y|_W^2 / (2 s^2) has mixed differences <dx, dy>_W / s^2, i.e. the
  // linear kernel on paths scaled channelwise by sqrt(w) / s.
  std::mt19937_64 rng(6);
  const double s = 1e3;
  const auto w = trapezoid_weights(3);
  for (int trial = 0; trial < 5; ++trial) {
    Path x = test::random_path(rng, 8, 3, 1.0);
    Path y = test::random_path(rng, 8, 3, 1.0);
    Matrix xs = x.values(), ys = y.values();
    for (int c = 0; c < 3; ++c) {
      xs.col(c) *= std::sqrt(w[static_cast<std::size_t>(c)]) / s;
      ys.col(c) *= std::sqrt(w[static_cast<std::size_t>(c)]) / s;
    }
    const double a = kernel_eval(x, y, StaticKernel::se_t_id(s), cfg(1));
    const double b = kernel_eval(Path(x.grid(), xs), Path(y.grid(), ys), StaticKernel::linear(), cfg(1));
    EXPECT_NEAR(a, b, 1e-6);
  }
}

TEST(KernelEval, RbfEqualsSeTIdOnSinglePointMesh) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Path x = test::gaussian_path(rng, 9, 1, 0.8);
    Path y = test::gaussian_path(rng, 7, 1, 0.8);
    EXPECT_NEAR(kernel_eval(x, y, StaticKernel::rbf(0.7), cfg(2)),
                kernel_eval(x, y, StaticKernel::se_t_id(0.7), cfg(2)), 1e-12);
  }
}

TEST(KernelEval, ErrorsOnMismatchAndOverflow) {
  std::mt19937_64 rng(8);
  Path x = test::gaussian_path(rng, 5, 2, 1.0);
  Path y = test::gaussian_path(rng, 5, 3, 1.0);
  EXPECT_THROW(kernel_eval(x, y, StaticKernel::linear(), cfg(0)), Error);
  EXPECT_THROW(kernel_eval(x, x, StaticKernel::linear(), cfg(11)), Error);

  Path big = Path(TimeGrid::uniform(0, 1, 64), Matrix::Zero(64, 1));
  Matrix v(64, 1);
  for (int i = 0; i < 64; ++i) v(i, 0) = 1e3 * i;
  Path huge(TimeGrid::uniform(0, 1, 64), v);
  try {
    kernel_eval(huge, huge, StaticKernel::linear(), cfg(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
  }
}

TEST(KernelGrad, ZeroForConstantPaths) {
  Path x(TimeGrid::uniform(0, 1, 4), Matrix::Constant(4, 2, 1.0));
  Path y(TimeGrid::uniform(0, 1, 3), Matrix::Constant(3, 2, -2.0));
  EXPECT_TRUE(kernel_grad_x(x, y, StaticKernel::linear(), cfg(2)).isZero(0));
}

TEST(KernelGrad, MatchesFiniteDifferencesForEveryStaticKernel) {
  std::mt19937_64 rng(9);
  for (auto scheme : {Scheme::order1, Scheme::order2}) {
    for (const auto& k : all_kernels()) {
      for (int trial = 0; trial < 3; ++trial) {
        Path x = test::gaussian_path(rng, 6, 3, 0.4);
        Path y = test::gaussian_path(rng, 5, 3, 0.4);
        const BoundStaticKernel bk(k, 3);
        const auto c = cfg(static_cast<unsigned>(trial), scheme);
        auto kg = kernel_value_and_grad(x.values(), y.values(), bk, c, true, true);
        auto fx = [&](const Matrix& v) { return kernel_eval(v, y.values(), bk, c); };
        auto fy = [&](const Matrix& v) { return kernel_eval(x.values(), v, bk, c); };
        EXPECT_LT(test::rel_err(kg.dx, test::fd_gradient(fx, x.values())), 1e-4) << to_string(k.type);
        EXPECT_LT(test::rel_err(kg.dy, test::fd_gradient(fy, y.values())), 1e-4) << to_string(k.type);
        EXPECT_DOUBLE_EQ(kg.value, kernel_eval(x.values(), y.values(), bk, c));
      }
    }
  }
}

TEST(KernelGrad, TimeChannelGradientIsProduced) {
  std::mt19937_64 rng(10);
  Path x = time_augment(test::gaussian_path(rng, 5, 1, 0.5));
  Path y = time_augment(test::gaussian_path(rng, 5, 1, 0.5));
  Matrix g = kernel_grad_x(x, y, StaticKernel::linear(), cfg(1));
  EXPECT_GT(g.col(0).norm(), 0.0);
}

TEST(Gram, Examples) {
  std::vector<Path> cs;
  for (int i = 0; i < 3; ++i) cs.emplace_back(TimeGrid::uniform(0, 1, 4), Matrix::Constant(4, 2, i));
  PathBatch C(cs);
  auto G = gram(C, C, StaticKernel::linear(), cfg(1));
  EXPECT_TRUE(G.symmetric);
  EXPECT_TRUE(G.entries.isOnes(0));

  std::mt19937_64 rng(11);
  PathBatch a({test::gaussian_path(rng, 5, 2, 1.0)});
  PathBatch b({test::gaussian_path(rng, 6, 2, 1.0)});
  auto g1 = gram(a, b, StaticKernel::rbf(1.0), cfg(2));
  EXPECT_FALSE(g1.symmetric);
  EXPECT_EQ(g1.entries(0, 0), kernel_eval(a[0], b[0], StaticKernel::rbf(1.0), cfg(2)));
}

TEST(Gram, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(12);
  for (const auto& k : all_kernels()) {
    std::vector<Path> ps;
    for (int i = 0; i < 6; ++i) ps.push_back(test::random_path(rng, 8, 2, 1.0));
    PathBatch X(ps);
    auto G = gram(X, X, k, cfg(2));
    EXPECT_LT((G.entries - G.entries.transpose()).norm(), 1e-12);
    for (int i = 0; i < 6; ++i) EXPECT_GE(G.entries(i, i), 1.0 - 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(G.entries));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8) << to_string(k.type);
  }
}

TEST(Gram, ErrorsCarryPairIndices) {
  std::vector<Path> ps;
  Matrix v(64, 1);
  for (int i = 0; i < 64; ++i) v(i, 0) = 1e3 * i;
  ps.emplace_back(TimeGrid::uniform(0, 1, 64), Matrix::Zero(64, 1));
  ps.emplace_back(TimeGrid::uniform(0, 1, 64), v);
  PathBatch X(ps);
  try {
    gram(X, X, StaticKernel::linear(), cfg(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pair (1, 1)"), std::string::npos);
  }
}
