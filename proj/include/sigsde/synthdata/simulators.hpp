#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sigsde/error.hpp"
#include "sigsde/parallel.hpp"
#include "sigsde/paths/csv.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/paths/transforms.hpp"
#include "sigsde/rng.hpp"
#include "sigsde/scores/scores.hpp"

namespace sigsde {

struct GbmConfig {
  double mu = 0.0;
  double sigma = 0.2;
  double y0 = 1.0;
  TimeGrid grid = TimeGrid::stepped(0.0, 0.01, 64);
  std::size_t n = 1024;
  std::uint64_t seed = 0;

  void validate() const {
    require(std::isfinite(mu), ErrorKind::validation, "gbm.mu must be finite");
    require(sigma >= 0 && std::isfinite(sigma), ErrorKind::validation, "gbm.sigma must be >= 0");
    require(y0 > 0 && std::isfinite(y0), ErrorKind::validation, "gbm.y0 must be > 0");
    require(n >= 1, ErrorKind::validation, "gbm.n must be >= 1");
  }
};

/// Exact lognormal stepping; time-augmented output with one value channel.
inline PathBatch gbm(const GbmConfig& cfg) {
  cfg.validate();
  const auto L = static_cast<Eigen::Index>(cfg.grid.size());
  std::vector<Path> out(cfg.n);
  parallel_for(cfg.n, [&](std::size_t i) {
    Rng rng = make_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> z;
    Matrix v(L, 2);
    double logy = std::log(cfg.y0);
    v(0, 0) = cfg.grid[0];
    v(0, 1) = cfg.y0;
    for (Eigen::Index k = 1; k < L; ++k) {
      const double dt = cfg.grid[static_cast<std::size_t>(k)] - cfg.grid[static_cast<std::size_t>(k) - 1];
      logy += (cfg.mu - 0.5 * cfg.sigma * cfg.sigma) * dt + cfg.sigma * std::sqrt(dt) * z(rng);
      v(k, 0) = cfg.grid[static_cast<std::size_t>(k)];
      v(k, 1) = std::exp(logy);
    }
    out[i] = Path(cfg.grid, std::move(v), true);
  });
  return PathBatch(std::move(out));
}

struct RBergomiConfig {
  double xi0 = 0.04;
  double eta = 1.5;
  double rho = -0.7;
  double H = 0.2;
  TimeGrid grid = TimeGrid::stepped(0.0, 1.0 / 32.0, 65);
  std::size_t n = 1024;
  std::uint64_t seed = 0;
  bool include_variance = false;

  double alpha() const { return H - 0.5; }

  /// H = 1/2 is accepted as a degenerate check case (X is then Brownian).
  void validate() const {
    require(xi0 > 0, ErrorKind::validation, "rbergomi.xi0 must be > 0");
    require(eta >= 0 && std::isfinite(eta), ErrorKind::validation, "rbergomi.eta must be >= 0");
    require(rho >= -1 && rho <= 1, ErrorKind::validation, "rbergomi.rho must lie in [-1, 1]");
    require(H > 0 && H <= 0.5, ErrorKind::validation, "rbergomi.H must lie in (0, 1/2]");
    require(n >= 1, ErrorKind::validation, "rbergomi.n must be >= 1");
    require(grid.front() == 0.0, ErrorKind::validation, "rbergomi grid must start at 0");
    const double dt = grid[1] - grid[0];
    for (std::size_t k = 1; k < grid.size(); ++k)
      require(std::abs((grid[k] - grid[k - 1]) - dt) <= 1e-12 * std::max(1.0, grid.back()), ErrorKind::validation,
              "rbergomi grid must be uniform");
  }
};

/// Cov(X_t, X_s) for X_t = int_0^t (t - u)^alpha dB_u.
inline double volterra_cov(double t, double s, double alpha) {
  if (t < s) std::swap(t, s);
  if (s <= 0) return 0.0;
  if (t == s) return std::pow(s, 2 * alpha + 1) / (2 * alpha + 1);
  if (alpha == 0.0) return s;
  // v = s - u; tanh-sinh clusters nodes at the v^alpha endpoint singularity.
  const double c = t - s;
  boost::math::quadrature::tanh_sinh<double> ts;
  double err = 0, l1 = 0;
  const double val = ts.integrate([&](double v) { return std::pow(v * (c + v), alpha); }, 0.0, s, 1e-14, &err, &l1);
  require(err <= 1e-12, ErrorKind::numeric, "volterra covariance quadrature did not converge");
  return val;
}

/// Cov(X_t, B_s) = int_0^min(t,s) (t - u)^alpha du.
inline double volterra_brownian_cov(double t, double s, double alpha) {
  const double m = std::min(t, s);
  if (m <= 0) return 0.0;
  const double a1 = alpha + 1.0;
  return (std::pow(t, a1) - std::pow(t - m, a1)) / a1;
}

/// Joint covariance of (X_{t_1..t_n}, B_{t_1..t_n}) on the positive grid nodes.
inline Eigen::MatrixXd rbergomi_joint_covariance(const TimeGrid& grid, double alpha) {
  const auto n = static_cast<Eigen::Index>(grid.size() - 1);
  Eigen::MatrixXd C(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = grid[static_cast<std::size_t>(i) + 1];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double tj = grid[static_cast<std::size_t>(j) + 1];
      C(i, j) = C(j, i) = volterra_cov(ti, tj, alpha);
      C(n + i, n + j) = C(n + j, n + i) = std::min(ti, tj);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double tj = grid[static_cast<std::size_t>(j) + 1];
      C(i, n + j) = C(n + j, i) = volterra_brownian_cov(ti, tj, alpha);
    }
  }
  return C;
}

/// Lower Cholesky factor. On failure 1e-12 * diag(C) is added once.
inline Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& C) {
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::MatrixXd J = C;
  J.diagonal() *= 1.0 + 1e-12;
  llt.compute(J);
  require(llt.info() == Eigen::Success, ErrorKind::numeric, "covariance is not positive definite after jitter");
  return llt.matrixL();
}

/// Rough Bergomi: X and B drawn exactly and jointly by Cholesky, variance
/// V_t = xi0 exp(eta sqrt(2 alpha + 1) X_t - eta^2 t^(2 alpha + 1) / 2), price
/// by log-Euler with driver rho dB + sqrt(1 - rho^2) dB_perp. Output channels:
/// time, price, and variance when include_variance.
inline PathBatch rbergomi(const RBergomiConfig& cfg) {
  cfg.validate();
  const double alpha = cfg.alpha();
  const Eigen::MatrixXd Lc = cholesky_with_jitter(rbergomi_joint_covariance(cfg.grid, alpha));
  const auto n = static_cast<Eigen::Index>(cfg.grid.size() - 1);
  const double scale = cfg.eta * std::sqrt(2 * alpha + 1);
  const double perp = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));
  const Eigen::Index cols = cfg.include_variance ? 3 : 2;

  std::vector<Path> out(cfg.n);
  parallel_for(cfg.n, [&](std::size_t p) {
    Rng rng = make_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(p)));
    std::normal_distribution<double> z;
    Eigen::VectorXd g(2 * n);
    for (auto& v : g) v = z(rng);
    const Eigen::VectorXd xb = Lc.triangularView<Eigen::Lower>() * g;
    Matrix v(n + 1, cols);
    double logy = 0.0, V = cfg.xi0, Bprev = 0.0;
    v(0, 0) = cfg.grid[0];
    v(0, 1) = 1.0;
    if (cfg.include_variance) v(0, 2) = V;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t0 = cfg.grid[static_cast<std::size_t>(k)], t1 = cfg.grid[static_cast<std::size_t>(k) + 1];
      const double dt = t1 - t0;
      const double dB = xb(n + k) - Bprev;
      Bprev = xb(n + k);
      const double dW = cfg.rho * dB + perp * std::sqrt(dt) * z(rng);
      logy += -0.5 * V * dt + std::sqrt(V) * dW;
      V = cfg.xi0 * std::exp(scale * xb(k) - 0.5 * cfg.eta * cfg.eta * std::pow(t1, 2 * alpha + 1));
      v(k + 1, 0) = t1;
      v(k + 1, 1) = std::exp(logy);
      if (cfg.include_variance) v(k + 1, 2) = V;
    }
    out[p] = Path(cfg.grid, std::move(v), true);
  });
  return PathBatch(std::move(out));
}

/// Reads a single series in the paths CSV format.
inline Path load_series(const std::string& file) {
  auto paths = load_paths_csv(file);
  require(paths.size() == 1, ErrorKind::parse,
          file + ": expected one series, found " + std::to_string(paths.size()));
  return std::move(paths.front());
}

struct PairOptions {
  bool normalize_initial = true;
  double scale = 100.0;
  bool translate = true;
};

/// Splits each window into its first past_len nodes and the next future_len
/// nodes. Windows are divided by their initial value and scaled first; each
/// half is then translated to zero and re-based to start at time 0.
inline std::vector<ConditionalPair> make_conditional_pairs(const PathBatch& windows, std::size_t past_len,
                                                           std::size_t future_len, const PairOptions& opt = {}) {
  require(past_len >= 2 && future_len >= 2, ErrorKind::invalid_argument, "pair halves need >= 2 nodes each");
  require(past_len + future_len <= windows.length(), ErrorKind::invalid_argument,
          "past_len + future_len = " + std::to_string(past_len + future_len) + " exceeds window length " +
              std::to_string(windows.length()));
  require(opt.scale > 0, ErrorKind::invalid_argument, "pair scale must be > 0");
  std::vector<ConditionalPair> out;
  out.reserve(windows.size());
  for (const Path& w : windows) {
    Matrix v = w.values();
    const auto c0 = static_cast<Eigen::Index>(w.first_value_channel());
    for (Eigen::Index c = c0; c < v.cols(); ++c) {
      if (opt.normalize_initial) {
        require(v(0, c) != 0.0, ErrorKind::degenerate_data, "cannot normalise a window starting at 0");
        v.col(c) /= v(0, c);
      }
      v.col(c) *= opt.scale;
    }
    auto part = [&](std::size_t start, std::size_t len) {
      std::vector<double> t(w.grid().times().begin() + static_cast<std::ptrdiff_t>(start),
                            w.grid().times().begin() + static_cast<std::ptrdiff_t>(start + len));
      Path p(TimeGrid(std::move(t)),
             v.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)), w.time_augmented());
      if (opt.translate) p = translate_to_zero(p);
      return rebase_time(p);
    };
    out.push_back({part(0, past_len), part(past_len, future_len)});
  }
  return out;
}

}  // namespace sigsde
