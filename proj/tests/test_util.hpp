#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "sigsde/paths/path.hpp"

namespace sigsde::test {

/// Random piecewise-linear path on [0, 1] with given total variation (sum of
/// Euclidean segment lengths).
inline Path random_path(std::mt19937_64& rng, std::size_t L, std::size_t d, double total_variation) {
  std::normal_distribution<double> z;
  Matrix inc(static_cast<Eigen::Index>(L - 1), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < inc.rows(); ++i)
    for (Eigen::Index c = 0; c < inc.cols(); ++c) inc(i, c) = z(rng);
  double tv = 0;
  for (Eigen::Index i = 0; i < inc.rows(); ++i) tv += inc.row(i).norm();
  inc *= total_variation / tv;
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 1; i < v.rows(); ++i) v.row(i) = v.row(i - 1) + inc.row(i - 1);
  return Path(TimeGrid::uniform(0, 1, L), v);
}

/// Random-walk path with Gaussian node values of given scale.
inline Path gaussian_path(std::mt19937_64& rng, std::size_t L, std::size_t d, double step) {
  std::normal_distribution<double> z;
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 1; i < v.rows(); ++i)
    for (Eigen::Index c = 0; c < v.cols(); ++c) v(i, c) = v(i - 1, c) + step * z(rng);
  return Path(TimeGrid::uniform(0, 1, L), v);
}

/// Central finite-difference gradient of f at the entries of x.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix xp = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double orig = xp(i, c);
      xp(i, c) = orig + h;
      const double fp = f(xp);
      xp(i, c) = orig - h;
      const double fm = f(xp);
      xp(i, c) = orig;
      g(i, c) = (fp - fm) / (2 * h);
    }
  return g;
}

/// Norm-wise relative error |a - b| / max(|a|, |b|, tiny).
inline double rel_err(const Matrix& a, const Matrix& b) {
  const double den = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / den;
}

/// sum_{k >= 0} z^k / (k!)^2, the signature kernel of two straight lines
/// whose increments have inner product z.
inline double line_kernel_series(double z, int terms = 40) {
  double s = 0, term = 1;
  for (int k = 0; k < terms; ++k) {
    s += term;
    term *= z / ((k + 1.0) * (k + 1.0));
  }
  return s;
}

}  // namespace sigsde::test
