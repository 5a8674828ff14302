#include <gtest/gtest.h>

#include "sigsde/diffengine/adam.hpp"
#include "sigsde/diffengine/backward.hpp"
#include "sigsde/diffengine/gradcheck.hpp"
#include "sigsde/parallel.hpp"

using namespace sigsde;

namespace {

SdeDims micro() { return SdeDims{.d_a = 2, .d_y = 3, .d_w = 2, .d_x = 1, .hidden = {8}}; }

std::vector<Matrix> random_upstream(std::size_t n, Eigen::Index L, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::vector<Matrix> g;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix m(L, 2);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = z(rng);
    g.push_back(m);
  }
  return g;
}

}  // namespace

TEST(Backward, ZeroUpstreamGivesZeroBundle) {
  const auto p = init_params(micro(), 1.0, 1);
  const auto grid = TimeGrid::uniform(0, 1, 5);
  Rollout rec;
  sample(p, 3, grid, draw_noise(micro(), 3, grid, 2), std::nullopt, &rec);
  const std::vector<Matrix> zero(3, Matrix::Zero(5, 2));
  for (double v : flatten(backward(p, rec, zero))) EXPECT_EQ(v, 0.0);
}

// One Euler step of a linear scalar model with no noise and squared loss on
// the terminal readout; every partial derivative has a closed form.
TEST(Backward, SingleStepLinearModelMatchesClosedForm) {
  SdeDims d{.d_a = 1, .d_y = 1, .d_w = 1, .d_x = 1, .hidden = {}, .learn_initial = false, .time_input = false,
            .drift_final = FinalActivation::identity, .diffusion_final = FinalActivation::identity};
  auto p = NeuralSdeParams::zeros(d);
  const double y0 = 0.7, w = -1.3, c = 0.4, a = 2.0, b0 = 0.1, dt = 0.25, target = 3.0;
  p.xi.b[0] << y0;
  p.mu.W[0] << w;
  p.mu.b[0] << c;
  p.A << a;
  p.b << b0;
  const auto grid = TimeGrid(std::vector<double>{0.0, dt});
  Rollout rec;
  const auto nb = draw_noise(d, 1, grid, 1);
  const auto x = sample(p, 1, grid, nb, std::nullopt, &rec)[0];
  const double y1 = y0 + dt * (w * y0 + c);
  const double dw = nb.dW[0](0, 0);
  const double r = a * y1 + b0 - target;
  ASSERT_DOUBLE_EQ(x(1, 1), a * y1 + b0);
  Matrix up = Matrix::Zero(2, 2);
  up(1, 1) = r;  // d/dX1 of r^2 / 2
  const auto g = backward(p, rec, {up});
  EXPECT_NEAR(g.mu.W[0](0, 0), r * a * dt * y0, 1e-15);
  EXPECT_NEAR(g.mu.b[0](0), r * a * dt, 1e-15);
  EXPECT_NEAR(g.A(0, 0), r * y1, 1e-15);
  EXPECT_NEAR(g.b(0), r, 1e-15);
  EXPECT_NEAR(g.xi.b[0](0), r * a * (1 + dt * w), 1e-15);
  // sigma is zero but still scales the noise increment.
  EXPECT_NEAR(g.sigma.W[0](0, 0), r * a * dw * y0, 1e-15);
  EXPECT_NEAR(g.sigma.b[0](0), r * a * dw, 1e-15);
}

TEST(Backward, LinearInUpstream) {
  const auto p = init_params(micro(), 1.0, 4);
  const auto grid = TimeGrid::uniform(0, 1, 7);
  Rollout rec;
  sample(p, 4, grid, draw_noise(micro(), 4, grid, 5), std::nullopt, &rec);
  auto g = random_upstream(4, 7, 6);
  const auto one = flatten(backward(p, rec, g));
  for (auto& m : g) m *= 2.0;
  const auto two = flatten(backward(p, rec, g));
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(two[i], 2.0 * one[i], 1e-12 * std::max(1.0, std::abs(one[i])));
}

TEST(Backward, IdenticalAcrossWorkerCounts) {
  const auto p = init_params(micro(), 1.0, 8);
  const auto grid = TimeGrid::uniform(0, 1, 9);
  Rollout rec;
  sample(p, 12, grid, draw_noise(micro(), 12, grid, 1), std::nullopt, &rec);
  const auto g = random_upstream(12, 9, 2);
  set_workers(1);
  const auto a = flatten(backward(p, rec, g));
  set_workers(4);
  const auto b = flatten(backward(p, rec, g));
  set_workers(0);
  EXPECT_EQ(a, b);
}

TEST(Backward, RejectsShapeMismatch) {
  const auto p = init_params(micro(), 1.0, 8);
  const auto grid = TimeGrid::uniform(0, 1, 4);
  Rollout rec;
  sample(p, 2, grid, draw_noise(micro(), 2, grid, 1), std::nullopt, &rec);
  EXPECT_THROW(backward(p, rec, random_upstream(1, 4, 1)), Error);
  EXPECT_THROW(backward(p, rec, random_upstream(2, 5, 1)), Error);
}

TEST(Gradcheck, AllStagesPass) {
  GradcheckConfig cfg;
  cfg.kernel.solver.dyadic_order = 1;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    cfg.seed = seed;
    const auto res = run_gradcheck(cfg);
    EXPECT_EQ(res.size(), 11u);
    for (const auto& r : res) EXPECT_TRUE(r.pass) << r.name << " rel err " << r.rel_err << " seed " << seed;
  }
}

TEST(Gradcheck, ConditionalPipelineMatchesFiniteDifferences) {
  SdeDims d = micro();
  d.d_c = 4;
  const auto p = init_params(d, 1.0, 3);
  const auto grid = TimeGrid::uniform(0, 1, 4);
  std::vector<ConditionalPair> pairs;
  std::vector<Vector> enc;
  Rng rng(5);
  std::normal_distribution<double> z;
  for (int i = 0; i < 2; ++i) {
    Matrix yv(4, 2);
    for (Eigen::Index k = 0; k < 4; ++k) yv(k, 0) = grid[static_cast<std::size_t>(k)], yv(k, 1) = z(rng);
    pairs.push_back({Path(grid, yv, true), apply_chain(TransformChain{{PathTransform::Kind::translate_to_zero, 1.0}}, Path(grid, yv, true))});
    Vector e(4);
    for (auto& v : e) v = z(rng);
    enc.push_back(e);
  }
  const TransformChain chain{{PathTransform::Kind::translate_to_zero, 1.0}};
  const KernelSpec ks = KernelSpec::single(StaticKernel::rbf(0.8), SolverConfig{1, SolverConfig::Scheme::order2});
  const auto an = flatten(*conditional_step(p, pairs, enc, 9, grid, chain, ks, 3, true).grad);
  auto loss = [&](const std::vector<double>& v) {
    auto q = p;
    unflatten(q, v);
    return conditional_step(q, pairs, enc, 9, grid, chain, ks, 3, false).loss;
  };
  EXPECT_LE(relative_error(an, central_differences(loss, flatten(p), 1e-5)), 1e-3);
}

TEST(Adam, ZeroGradientsLeaveParams) {
  auto p = init_params(micro(), 1.0, 1);
  const auto before = flatten(p);
  AdamState st;
  ASSERT_TRUE(adam_step(p, zeros_like(p), st));
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(flatten(p), before);
}

TEST(Adam, ConstantGradientStepsApproachLr) {
  auto p = init_params(micro(), 1.0, 1);
  auto g = zeros_like(p);
  std::vector<double> gv(parameter_count(p));
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = (i % 2 ? 1.0 : -1.0) * (0.01 + 0.1 * static_cast<double>(i % 7));
  unflatten(g, gv);
  AdamState st;
  st.config.lr = 1e-3;
  std::vector<double> prev = flatten(p);
  for (int s = 0; s < 200; ++s) {
    ASSERT_TRUE(adam_step(p, g, st));
    const auto cur = flatten(p);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double step = cur[i] - prev[i];
      EXPECT_NEAR(step, -1e-3 * (gv[i] > 0 ? 1.0 : -1.0), 1e-3 * 1e-5);
    }
    prev = cur;
  }
}

TEST(Adam, ZeroLearningRateAndNonFiniteGradients) {
  auto p = init_params(micro(), 1.0, 1);
  const auto before = flatten(p);
  auto g = zeros_like(p);
  g.A(0, 0) = 3.0;
  AdamState st;
  st.config.lr = 0;
  ASSERT_TRUE(adam_step(p, g, st));
  EXPECT_EQ(flatten(p), before);

  AdamState st2;
  g.b(0) = std::nan("");
  EXPECT_FALSE(adam_step(p, g, st2));
  EXPECT_EQ(st2.step, 0u);
  EXPECT_EQ(flatten(p), before);
  EXPECT_THROW((AdamConfig{.lr = 1e-3, .beta1 = 1.0}.validate()), Error);
}
