#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"

namespace sigsde {

/// Kernel on the state space of a path. The SE-T variants read a state
/// vector of dimension d as samples of a function on the uniform mesh of
/// [0, 1] with d points and use the trapezoidal L2 inner product.
struct StaticKernel {
  enum class Type { linear, rbf, se_t_id, se_t_sqr, se_t_cexp };

  Type type = Type::linear;
  double sigma = 1.0;
  double length_scale = 1.0;  // CEXP only
  int terms = 1;              // CEXP only (F)

  static StaticKernel linear() { return {}; }
  static StaticKernel rbf(double sigma) { return checked({Type::rbf, sigma, 1.0, 1}); }
  static StaticKernel se_t_id(double sigma) { return checked({Type::se_t_id, sigma, 1.0, 1}); }
  static StaticKernel se_t_sqr(double sigma) { return checked({Type::se_t_sqr, sigma, 1.0, 1}); }
  static StaticKernel se_t_cexp(double sigma, double l, int F) {
    return checked({Type::se_t_cexp, sigma, l, F});
  }

  static StaticKernel checked(StaticKernel k) {
    require(k.sigma > 0 && std::isfinite(k.sigma), ErrorKind::invalid_argument,
            "static kernel sigma must be positive");
    require(k.length_scale > 0 && std::isfinite(k.length_scale), ErrorKind::invalid_argument,
            "static kernel length scale must be positive");
    require(k.terms >= 1, ErrorKind::invalid_argument, "CEXP needs F >= 1");
    return k;
  }

  bool operator==(const StaticKernel&) const = default;
};

inline std::string to_string(StaticKernel::Type t) {
  switch (t) {
    case StaticKernel::Type::linear: return "linear";
    case StaticKernel::Type::rbf: return "rbf";
    case StaticKernel::Type::se_t_id: return "se_t_id";
    case StaticKernel::Type::se_t_sqr: return "se_t_sqr";
    case StaticKernel::Type::se_t_cexp: return "se_t_cexp";
  }
  return "?";
}

inline StaticKernel::Type static_kernel_type_from_string(const std::string& s) {
  using T = StaticKernel::Type;
  if (s == "linear") return T::linear;
  if (s == "rbf") return T::rbf;
  if (s == "se_t_id") return T::se_t_id;
  if (s == "se_t_sqr") return T::se_t_sqr;
  if (s == "se_t_cexp") return T::se_t_cexp;
  fail(ErrorKind::invalid_argument, "unknown static kernel '" + s + "'");
}

/// Trapezoidal weights of the uniform mesh of [0, 1] with d points. A single
/// point gets weight 1 so the L2 product reduces to the Euclidean one.
inline std::vector<double> trapezoid_weights(std::size_t d) {
  if (d == 1) return {1.0};
  const double h = 1.0 / static_cast<double>(d - 1);
  std::vector<double> w(d, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

/// CEXP covariance operator on the mesh: (C f)_a = sum_b k(m_a, m_b) w_b f_b
/// with k(x, x') = exp(-(x - x')^2 / (2 l^2)) sum_{n<F} cos(2 pi n (x - x')).
inline Matrix cexp_operator(std::size_t d, double l, int F) {
  const auto w = trapezoid_weights(d);
  Matrix C(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      const double ma = d == 1 ? 0.0 : static_cast<double>(a) / static_cast<double>(d - 1);
      const double mb = d == 1 ? 0.0 : static_cast<double>(b) / static_cast<double>(d - 1);
      const double r = ma - mb;
      double s = 0;
      for (int n = 0; n < F; ++n) s += std::cos(2.0 * std::numbers::pi * n * r);
      C(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          std::exp(-r * r / (2.0 * l * l)) * s * w[b];
    }
  }
  return C;
}

/// A static kernel bound to a state dimension. Squared-exponential variants
/// are evaluated through an explicit feature map phi with
/// kappa(x, y) = exp(-|phi(x) - phi(y)|^2 / (2 sigma^2)).
class BoundStaticKernel {
 public:
  BoundStaticKernel(const StaticKernel& k, std::size_t dim) : k_(k), dim_(dim) {
    using T = StaticKernel::Type;
    if (k_.type == T::linear) return;
    std::vector<double> w =
        k_.type == T::rbf ? std::vector<double>(dim, 1.0) : trapezoid_weights(dim);
    sqrt_w_.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) sqrt_w_[i] = std::sqrt(w[i]);
    if (k_.type == T::se_t_cexp) {
      Matrix C = cexp_operator(dim, k_.length_scale, k_.terms);
      // Feature map phi(x) = diag(sqrt w) C x.
      feat_ = C;
      for (Eigen::Index a = 0; a < feat_.rows(); ++a) feat_.row(a) *= sqrt_w_[static_cast<std::size_t>(a)];
    }
  }

  bool is_linear() const { return k_.type == StaticKernel::Type::linear; }
  std::size_t dim() const { return dim_; }
  const StaticKernel& spec() const { return k_; }

  std::size_t feature_dim() const {
    return k_.type == StaticKernel::Type::se_t_sqr ? 2 * dim_ : dim_;
  }

  /// Feature rows phi(x_i) for every row of `x`.
  Matrix features(const Matrix& x) const {
    using T = StaticKernel::Type;
    const auto L = x.rows();
    const auto d = static_cast<Eigen::Index>(dim_);
    Matrix out(L, static_cast<Eigen::Index>(feature_dim()));
    switch (k_.type) {
      case T::linear:
        out = x;
        break;
      case T::rbf:
      case T::se_t_id:
        for (Eigen::Index i = 0; i < L; ++i)
          for (Eigen::Index c = 0; c < d; ++c) out(i, c) = sqrt_w_[static_cast<std::size_t>(c)] * x(i, c);
        break;
      case T::se_t_sqr:
        for (Eigen::Index i = 0; i < L; ++i)
          for (Eigen::Index c = 0; c < d; ++c) {
            const double s = sqrt_w_[static_cast<std::size_t>(c)];
            out(i, c) = s * x(i, c);
            out(i, d + c) = s * x(i, c) * x(i, c);
          }
        break;
      case T::se_t_cexp:
        out = x * feat_.transpose();
        break;
    }
    return out;
  }

  /// Gram of the static kernel between the rows of x and y.
  Matrix gram(const Matrix& x, const Matrix& y) const {
    if (is_linear()) return x * y.transpose();
    const Matrix fx = features(x), fy = features(y);
    const double inv = 1.0 / (2.0 * k_.sigma * k_.sigma);
    const auto F = fx.cols();
    Matrix K(x.rows(), y.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double* a = fx.data() + i * F;
      double* out = K.data() + i * K.cols();
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        const double* b = fy.data() + j * F;
        double s = 0;
        for (Eigen::Index c = 0; c < F; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
        out[j] = -s * inv;
      }
    }
    K = K.array().exp().matrix();
    return K;
  }

  /// Gradient of sum_ij dK(i, j) kappa(x_i, y_j) with respect to the rows of x.
  Matrix grad_first(const Matrix& x, const Matrix& y, const Matrix& K, const Matrix& dK) const {
    using T = StaticKernel::Type;
    if (is_linear()) return dK * y;
    const Matrix fx = features(x), fy = features(y);
    const double inv_s2 = 1.0 / (k_.sigma * k_.sigma);
    // d kappa / d phi(x) = -kappa (phi(x) - phi(y)) / sigma^2, summed over j
    // with weights C = dK .* K.
    const Matrix C = dK.cwiseProduct(K);
    Matrix dfeat = C * fy;
    dfeat -= C.rowwise().sum().asDiagonal() * fx;
    dfeat *= inv_s2;
    const auto d = static_cast<Eigen::Index>(dim_);
    Matrix dx(x.rows(), d);
    switch (k_.type) {
      case T::rbf:
      case T::se_t_id:
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index c = 0; c < d; ++c) dx(i, c) = sqrt_w_[static_cast<std::size_t>(c)] * dfeat(i, c);
        break;
      case T::se_t_sqr:
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          for (Eigen::Index c = 0; c < d; ++c) {
            const double s = sqrt_w_[static_cast<std::size_t>(c)];
            dx(i, c) = s * dfeat(i, c) + 2.0 * s * x(i, c) * dfeat(i, d + c);
          }
        break;
      case T::se_t_cexp:
        dx = dfeat * feat_;
        break;
      case T::linear:
        break;
    }
    return dx;
  }

 private:
  StaticKernel k_;
  std::size_t dim_;
  std::vector<double> sqrt_w_;
  Matrix feat_;
};

}  // namespace sigsde
