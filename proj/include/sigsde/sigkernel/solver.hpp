#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/sigkernel/static_kernel.hpp"

namespace sigsde {

/// Finite-difference settings for the signature-kernel Goursat problem.
struct SolverConfig {
  enum class Scheme { order1, order2 };

  unsigned dyadic_order = 2;
  Scheme scheme = Scheme::order2;

  void validate() const {
    require(dyadic_order <= 10, ErrorKind::invalid_argument, "dyadic order must be <= 10");
  }

  bool operator==(const SolverConfig&) const = default;
};

/// Kernel value with optional gradients w.r.t. the node values of each path.
struct KernelGrad {
  double value = 0;
  Matrix dx;  // empty unless requested
  Matrix dy;  // empty unless requested
};

namespace detail {

constexpr double kDivergenceBound = 1e300;

/// Driving terms A_ij: second mixed differences of the static kernel over
/// the original cells. For the linear kernel this is <dx_i, dy_j>.
inline Matrix driving_terms(const Matrix& x, const Matrix& y, const BoundStaticKernel& k, Matrix* K_out) {
  const auto m = x.rows() - 1, n = y.rows() - 1;
  if (k.is_linear()) {
    const Matrix dx = x.bottomRows(m) - x.topRows(m);
    const Matrix dy = y.bottomRows(n) - y.topRows(n);
    Matrix A = dx * dy.transpose();
    require(A.allFinite(), ErrorKind::numeric, "non-finite static kernel increments");
    return A;
  }
  Matrix K = k.gram(x, y);
  require(K.allFinite(), ErrorKind::numeric, "non-finite static kernel values");
  Matrix A = K.bottomRightCorner(m, n) - K.bottomLeftCorner(m, n) - K.topRightCorner(m, n) +
             K.topLeftCorner(m, n);
  if (K_out) *K_out = std::move(K);
  return A;
}

inline void check_divergence(double v) {
  if (!std::isfinite(v) || std::abs(v) > kDivergenceBound)
    fail(ErrorKind::divergence,
         "signature kernel diverged (|k| > 1e300); reduce the path scale");
}

struct Scratch {
  std::vector<double> f;
  std::vector<double> g;
};

inline Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

/// Per original cell: f11 = (f10 + f01) c1 - f00 c2, row-major m x n.
inline void pde_coefficients(const Matrix& A, const SolverConfig& cfg, std::vector<double>& c1,
                             std::vector<double>& c2) {
  const std::size_t r = std::size_t{1} << cfg.dyadic_order;
  const double inv = 1.0 / static_cast<double>(r * r);
  const bool o2 = cfg.scheme == SolverConfig::Scheme::order2;
  c1.resize(static_cast<std::size_t>(A.size()));
  c2.resize(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) {
    const double a = A.data()[k] * inv;
    if (o2) {
      c1[k] = 1.0 + 0.5 * a + a * a / 12.0;
      c2[k] = 1.0 - a * a / 12.0;
    } else {
      c1[k] = 1.0;
      c2[k] = 1.0 - a;
    }
  }
}

/// Solves the refined Goursat problem, storing every node of the refined grid
/// (row-major P x Q) in `full`, or in thread-local scratch when null.
inline double solve_pde(const Matrix& A, const SolverConfig& cfg, std::vector<double>* full) {
  const unsigned sh = cfg.dyadic_order;
  const std::size_t r = std::size_t{1} << sh;
  const std::size_t m = static_cast<std::size_t>(A.rows()), n = static_cast<std::size_t>(A.cols());
  const std::size_t P = m * r + 1, Q = n * r + 1, W = Q - 1;
  thread_local std::vector<double> c1, c2;
  pde_coefficients(A, cfg, c1, c2);
  std::vector<double>& f = full ? *full : scratch().f;
  f.assign(P * Q, 1.0);

  // Four rows per pass along a skewed front: at step s row p0 + b updates
  // column s - b, so the four recurrences are independent.
  constexpr std::size_t B = 4;
  for (std::size_t p0 = 0; p0 + 1 < P; p0 += B) {
    const std::size_t nb = std::min(B, P - 1 - p0);
    double* rows[B];
    const double* k1[B];
    const double* k2[B];
    for (std::size_t b = 0; b < nb; ++b) {
      rows[b] = f.data() + (p0 + b + 1) * Q;
      k1[b] = c1.data() + ((p0 + b) >> sh) * n;
      k2[b] = c2.data() + ((p0 + b) >> sh) * n;
    }
    auto cell = [&](std::size_t b, std::size_t q) {
      double* cur = rows[b];
      const double* prev = cur - Q;
      const std::size_t j = q >> sh;
      cur[q + 1] = (cur[q] + prev[q + 1]) * k1[b][j] - prev[q] * k2[b][j];
    };
    if (nb == B && W >= B) {
      for (std::size_t s = 0; s + 1 < B; ++s)
        for (std::size_t b = 0; b <= s; ++b) cell(b, s - b);
      for (std::size_t s = B - 1; s < W; ++s) {
        cell(0, s);
        cell(1, s - 1);
        cell(2, s - 2);
        cell(3, s - 3);
      }
      for (std::size_t s = W; s < W + B - 1; ++s)
        for (std::size_t b = s - W + 1; b < B; ++b) cell(b, s - b);
    } else {
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t q = 0; q < W; ++q) cell(b, q);
    }
  }
  return f[P * Q - 1];
}

/// Reverse sweep of solve_pde: returns d(output)/dA given the stored grid.
inline Matrix solve_pde_adjoint(const Matrix& A, const SolverConfig& cfg, const std::vector<double>& f,
                                std::vector<double>& g) {
  const std::size_t r = std::size_t{1} << cfg.dyadic_order;
  const std::size_t m = static_cast<std::size_t>(A.rows()), n = static_cast<std::size_t>(A.cols());
  const std::size_t P = m * r + 1, Q = n * r + 1;
  const double inv = 1.0 / static_cast<double>(r * r);
  const bool o2 = cfg.scheme == SolverConfig::Scheme::order2;

  g.assign(P * Q, 0.0);
  g[P * Q - 1] = 1.0;
  Matrix dA = Matrix::Zero(A.rows(), A.cols());
  std::vector<double> av(n), c1(n), c2(n), da_row(n);

  for (std::size_t p = P - 1; p-- > 0;) {
    const std::size_t i = p / r;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * inv;
      av[j] = a;
      c1[j] = o2 ? 1.0 + 0.5 * a + a * a / 12.0 : 1.0;
      c2[j] = o2 ? 1.0 - a * a / 12.0 : 1.0 - a;
    }
    std::fill(da_row.begin(), da_row.end(), 0.0);
    const double* f0 = f.data() + p * Q;
    const double* f1 = f.data() + (p + 1) * Q;
    double* g0 = g.data() + p * Q;
    double* g1 = g.data() + (p + 1) * Q;
    for (std::size_t q = Q - 1; q-- > 0;) {
      const double gv = g1[q + 1];
      if (gv == 0.0) continue;
      const std::size_t j = q >> cfg.dyadic_order;
      const double a = av[j];
      g1[q] += gv * c1[j];
      g0[q + 1] += gv * c1[j];
      g0[q] -= gv * c2[j];
      if (o2)
        da_row[j] += gv * ((f1[q] + f0[q + 1]) * (0.5 + a / 6.0) + f0[q] * (a / 6.0));
      else
        da_row[j] += gv * f0[q];
    }
    for (std::size_t j = 0; j < n; ++j) dA(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += da_row[j] * inv;
  }
  return dA;
}

}  // namespace detail

/// Signature kernel of two paths given as raw L x d value matrices.
inline double kernel_eval(const Matrix& x, const Matrix& y, const BoundStaticKernel& k,
                          const SolverConfig& cfg) {
  require(x.cols() == y.cols(), ErrorKind::invalid_argument, "kernel_eval: channel count mismatch");
  require(x.rows() >= 2 && y.rows() >= 2, ErrorKind::invalid_argument, "kernel_eval: paths need >= 2 nodes");
  cfg.validate();
  const Matrix A = detail::driving_terms(x, y, k, nullptr);
  const double v = detail::solve_pde(A, cfg, nullptr);
  detail::check_divergence(v);
  return v;
}

inline double kernel_eval(const Path& x, const Path& y, const StaticKernel& sk, const SolverConfig& cfg) {
  return kernel_eval(x.values(), y.values(), BoundStaticKernel(sk, x.channels()), cfg);
}

/// Kernel value and exact gradients of the discrete solver output with
/// respect to the node values of x and/or y.
inline KernelGrad kernel_value_and_grad(const Matrix& x, const Matrix& y, const BoundStaticKernel& k,
                                        const SolverConfig& cfg, bool want_dx, bool want_dy) {
  require(x.cols() == y.cols(), ErrorKind::invalid_argument, "kernel_eval: channel count mismatch");
  require(x.rows() >= 2 && y.rows() >= 2, ErrorKind::invalid_argument, "kernel_eval: paths need >= 2 nodes");
  cfg.validate();
  Matrix K;
  const Matrix A = detail::driving_terms(x, y, k, &K);
  auto& s = detail::scratch();
  KernelGrad out;
  out.value = detail::solve_pde(A, cfg, &s.f);
  detail::check_divergence(out.value);
  if (!want_dx && !want_dy) return out;

  const Matrix dA = detail::solve_pde_adjoint(A, cfg, s.f, s.g);
  const auto m = x.rows() - 1, n = y.rows() - 1;
  if (k.is_linear()) {
    const Matrix ddx = dA * (y.bottomRows(n) - y.topRows(n));
    const Matrix ddy = dA.transpose() * (x.bottomRows(m) - x.topRows(m));
    auto undiff = [](const Matrix& dd) {
      Matrix g = Matrix::Zero(dd.rows() + 1, dd.cols());
      g.bottomRows(dd.rows()) += dd;
      g.topRows(dd.rows()) -= dd;
      return g;
    };
    if (want_dx) out.dx = undiff(ddx);
    if (want_dy) out.dy = undiff(ddy);
    return out;
  }
  Matrix dK = Matrix::Zero(x.rows(), y.rows());
  dK.bottomRightCorner(m, n) += dA;
  dK.bottomLeftCorner(m, n) -= dA;
  dK.topRightCorner(m, n) -= dA;
  dK.topLeftCorner(m, n) += dA;
  if (want_dx) out.dx = k.grad_first(x, y, K, dK);
  if (want_dy) {
    const Matrix Kt = K.transpose(), dKt = dK.transpose();
    out.dy = k.grad_first(y, x, Kt, dKt);
  }
  return out;
}

/// Gradient of kernel_eval(x, y) with respect to the node values of x.
inline Matrix kernel_grad_x(const Path& x, const Path& y, const StaticKernel& sk, const SolverConfig& cfg) {
  return kernel_value_and_grad(x.values(), y.values(), BoundStaticKernel(sk, x.channels()), cfg, true, false).dx;
}

}  // namespace sigsde
