#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sigsde/diffengine/backward.hpp"
#include "sigsde/nsde/mlp.hpp"
#include "sigsde/nsde/neural_sde.hpp"
#include "sigsde/nsde/train.hpp"
#include "sigsde/rng.hpp"
#include "sigsde/sigkernel/solver.hpp"

namespace sigsde {

struct GradcheckResult {
  std::string name;
  double rel_err = 0;
  double tol = 0;
  bool pass = false;
};

/// Central differences of f over the entries of x.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// |a - b| / max(|a|, |b|) in the Euclidean norm.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

struct GradcheckConfig {
  SdeDims dims{.d_a = 2, .d_y = 3, .d_w = 2, .d_x = 1, .d_c = 0, .hidden = {8}};
  std::size_t length = 5;
  std::size_t batch = 3;
  double init_scale = 1.0;
  KernelSpec kernel;
  TransformChain transforms{{PathTransform::Kind::translate_to_zero, 1.0}, {PathTransform::Kind::time_normalize, 1.0}};
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol_pure = 1e-4;
  double tol_pipeline = 1e-3;
};

namespace detail {

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  std::normal_distribution<double> z;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * z(rng);
  return m;
}

inline std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

inline Matrix unflat(const std::vector<double>& v, Eigen::Index r, Eigen::Index c) {
  return Eigen::Map<const Matrix>(v.data(), r, c);
}

}  // namespace detail

/// Randomised finite-difference checks of every differentiable stage: MLP
/// (parameters and input), Euler rollout with readout, the kernel PDE for each
/// static kernel, and the full training objective.
inline std::vector<GradcheckResult> run_gradcheck(const GradcheckConfig& cfg) {
  std::vector<GradcheckResult> out;
  auto record = [&](std::string name, double err, double tol) {
    out.push_back({std::move(name), err, tol, std::isfinite(err) && err <= tol});
  };
  Rng rng = make_rng(derive_seed(cfg.seed, "gradcheck"));
  const SdeDims& d = cfg.dims;

  for (FinalActivation fa : {FinalActivation::tanh, FinalActivation::identity}) {
    NeuralSdeParams tmp = init_params(SdeDims{.d_a = 3, .d_y = 2, .d_w = 1, .hidden = {5, 4}}, 1.0, rng());
    Mlp net = tmp.mu;
    net.final_activation = fa;
    for (auto& b : net.b) b = detail::random_matrix(rng, b.size(), 1, 0.3);
    const Vector x = detail::random_matrix(rng, static_cast<Eigen::Index>(net.in_dim()), 1);
    const Vector r = detail::random_matrix(rng, static_cast<Eigen::Index>(net.out_dim()), 1);
    Mlp g = net;
    for (auto& W : g.W) W.setZero();
    for (auto& b : g.b) b.setZero();
    MlpTape tape;
    forward(net, x, &tape);
    const Vector gin = backward(net, tape, r, g);

    std::vector<double> an, p0;
    for (std::size_t l = 0; l < net.layers(); ++l) {
      for (Eigen::Index i = 0; i < g.W[l].size(); ++i) an.push_back(g.W[l].data()[i]), p0.push_back(net.W[l].data()[i]);
      for (Eigen::Index i = 0; i < g.b[l].size(); ++i) an.push_back(g.b[l].data()[i]), p0.push_back(net.b[l].data()[i]);
    }
    auto loss_p = [&](const std::vector<double>& v) {
      Mlp m = net;
      std::size_t k = 0;
      for (std::size_t l = 0; l < m.layers(); ++l) {
        for (Eigen::Index i = 0; i < m.W[l].size(); ++i) m.W[l].data()[i] = v[k++];
        for (Eigen::Index i = 0; i < m.b[l].size(); ++i) m.b[l].data()[i] = v[k++];
      }
      return r.dot(forward(m, x));
    };
    auto loss_x = [&](const std::vector<double>& v) {
      return r.dot(forward(net, Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))));
    };
    const std::string tag = "mlp_" + to_string(fa);
    record(tag + "_params", relative_error(an, central_differences(loss_p, p0, cfg.h)), cfg.tol_pure);
    record(tag + "_input",
           relative_error({gin.data(), gin.data() + gin.size()},
                          central_differences(loss_x, {x.data(), x.data() + x.size()}, cfg.h)),
           cfg.tol_pure);
  }

  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, cfg.length);
  NeuralSdeParams params = init_params(d, cfg.init_scale, rng());
  visit_tensors(params, [&](const std::string& name, auto& t) {
    if (name.find(".b") != std::string::npos || name == "b")
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 0.1 * std::normal_distribution<double>()(rng);
  });
  const NoiseBundle noise = draw_noise(d, cfg.batch, grid, rng());
  const auto p0 = flatten(params);
  auto with = [&](const std::vector<double>& v) {
    NeuralSdeParams p = params;
    unflatten(p, v);
    return p;
  };

  {
    std::vector<Matrix> up;
    for (std::size_t i = 0; i < cfg.batch; ++i)
      up.push_back(detail::random_matrix(rng, static_cast<Eigen::Index>(cfg.length), static_cast<Eigen::Index>(d.d_x + 1)));
    for (auto& u : up) u.col(0).setZero();
    Rollout rec;
    sample(params, cfg.batch, grid, noise, std::nullopt, &rec);
    const auto an = flatten(backward(params, rec, up));
    auto loss = [&](const std::vector<double>& v) {
      const PathBatch b = sample(with(v), cfg.batch, grid, noise);
      double s = 0;
      for (std::size_t i = 0; i < cfg.batch; ++i) s += (b[i].values().array() * up[i].array()).sum();
      return s;
    };
    record("euler_rollout_readout", relative_error(an, central_differences(loss, p0, cfg.h)), cfg.tol_pure);
  }

  {
    const std::vector<StaticKernel> kernels{StaticKernel::linear(), StaticKernel::rbf(1.0), StaticKernel::se_t_id(1.0),
                                            StaticKernel::se_t_sqr(1.0), StaticKernel::se_t_cexp(1.0, 0.5, 3)};
    for (const auto& sk : kernels) {
      const Matrix x = detail::random_matrix(rng, 6, 2, 0.3), y = detail::random_matrix(rng, 5, 2, 0.3);
      const BoundStaticKernel bk(sk, 2);
      const auto kg = kernel_value_and_grad(x, y, bk, cfg.kernel.solver, true, false);
      auto f = [&](const std::vector<double>& v) {
        return kernel_eval(detail::unflat(v, x.rows(), x.cols()), y, bk, cfg.kernel.solver);
      };
      record("kernel_pde_" + to_string(sk.type), relative_error(detail::flat(kg.dx), central_differences(f, detail::flat(x), cfg.h)),
             cfg.tol_pure);
    }
  }

  {
    std::vector<Path> real;
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      Matrix v(static_cast<Eigen::Index>(cfg.length), static_cast<Eigen::Index>(d.d_x + 1));
      v.rightCols(static_cast<Eigen::Index>(d.d_x)) =
          detail::random_matrix(rng, static_cast<Eigen::Index>(cfg.length), static_cast<Eigen::Index>(d.d_x), 0.5);
      for (std::size_t k = 0; k < cfg.length; ++k) v(static_cast<Eigen::Index>(k), 0) = grid[k];
      real.push_back(Path(grid, v, true));
    }
    const PathBatch rb = apply_chain(cfg.transforms, PathBatch(real));
    const auto an =
        flatten(*unconditional_step(params, rb, noise, grid, cfg.transforms, cfg.kernel, true).grad);
    auto loss = [&](const std::vector<double>& v) {
      return unconditional_step(with(v), rb, noise, grid, cfg.transforms, cfg.kernel, false).loss;
    };
    record("full_pipeline", relative_error(an, central_differences(loss, p0, cfg.h)), cfg.tol_pipeline);
  }
  return out;
}

}  // namespace sigsde
