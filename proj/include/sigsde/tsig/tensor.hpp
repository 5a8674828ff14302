#pragma once

#include <cstddef>
#include <vector>

#include "sigsde/error.hpp"

namespace sigsde {

/// Element of the truncated tensor algebra T^(N)(R^d): levels 0..N, level k
/// stored densely with d^k entries in lexicographic (row-major) word order.
class TruncatedTensor {
 public:
  TruncatedTensor() = default;
  TruncatedTensor(std::size_t dim, std::size_t depth) : dim_(dim), depth_(depth), levels_(depth + 1) {
    std::size_t n = 1;
    for (std::size_t k = 0; k <= depth; ++k) {
      levels_[k].assign(n, 0.0);
      n *= dim;
    }
  }

  /// The unit (1, 0, 0, ...).
  static TruncatedTensor unit(std::size_t dim, std::size_t depth) {
    TruncatedTensor t(dim, depth);
    t.levels_[0][0] = 1.0;
    return t;
  }

  /// Truncated exponential of a level-1 element: level k is v^{(x)k} / k!.
  static TruncatedTensor exp_of_vector(const double* v, std::size_t dim, std::size_t depth) {
    TruncatedTensor t = unit(dim, depth);
    for (std::size_t k = 1; k <= depth; ++k) {
      const auto& prev = t.levels_[k - 1];
      auto& cur = t.levels_[k];
      const double inv_k = 1.0 / static_cast<double>(k);
      for (std::size_t a = 0; a < prev.size(); ++a)
        for (std::size_t b = 0; b < dim; ++b) cur[a * dim + b] = prev[a] * v[b] * inv_k;
    }
    return t;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return depth_; }
  const std::vector<double>& level(std::size_t k) const { return levels_.at(k); }
  std::vector<double>& level(std::size_t k) { return levels_.at(k); }

  /// Concatenation of levels from..depth into one vector.
  std::vector<double> flatten(std::size_t from = 0) const {
    std::vector<double> out;
    for (std::size_t k = from; k <= depth_; ++k)
      out.insert(out.end(), levels_[k].begin(), levels_[k].end());
    return out;
  }

  TruncatedTensor& operator+=(const TruncatedTensor& o) {
    check_compatible(o);
    for (std::size_t k = 0; k <= depth_; ++k)
      for (std::size_t i = 0; i < levels_[k].size(); ++i) levels_[k][i] += o.levels_[k][i];
    return *this;
  }

  TruncatedTensor& operator*=(double c) {
    for (auto& l : levels_)
      for (auto& v : l) v *= c;
    return *this;
  }

  void check_compatible(const TruncatedTensor& o) const {
    require(dim_ == o.dim_ && depth_ == o.depth_, ErrorKind::invalid_argument,
            "tensor dimension/depth mismatch");
  }

 private:
  std::size_t dim_ = 0;
  std::size_t depth_ = 0;
  std::vector<std::vector<double>> levels_;
};

/// Truncated tensor product: (a b)_k = sum_i a_i (x) b_{k-i}.
inline TruncatedTensor tensor_product(const TruncatedTensor& a, const TruncatedTensor& b) {
  a.check_compatible(b);
  const std::size_t d = a.dim(), N = a.depth();
  TruncatedTensor out(d, N);
  for (std::size_t k = 0; k <= N; ++k) {
    auto& dst = out.level(k);
    for (std::size_t i = 0; i <= k; ++i) {
      const auto& left = a.level(i);
      const auto& right = b.level(k - i);
      const std::size_t rs = right.size();
      for (std::size_t p = 0; p < left.size(); ++p) {
        const double lp = left[p];
        if (lp == 0.0) continue;
        double* row = dst.data() + p * rs;
        for (std::size_t q = 0; q < rs; ++q) row[q] += lp * right[q];
      }
    }
  }
  return out;
}

/// Truncated logarithm, defined for tensors with level 0 equal to 1.
inline TruncatedTensor tensor_log(const TruncatedTensor& t) {
  require(t.level(0)[0] == 1.0, ErrorKind::invalid_argument, "tensor_log needs unit level 0");
  const std::size_t d = t.dim(), N = t.depth();
  TruncatedTensor x = t;
  x.level(0)[0] = 0.0;
  TruncatedTensor out(d, N);
  TruncatedTensor power = x;
  for (std::size_t n = 1; n <= N; ++n) {
    TruncatedTensor term = power;
    term *= ((n % 2 == 1) ? 1.0 : -1.0) / static_cast<double>(n);
    out += term;
    if (n < N) power = tensor_product(power, x);
  }
  return out;
}

/// Truncated exponential, defined for tensors with level 0 equal to 0.
inline TruncatedTensor tensor_exp(const TruncatedTensor& x) {
  require(x.level(0)[0] == 0.0, ErrorKind::invalid_argument, "tensor_exp needs zero level 0");
  const std::size_t d = x.dim(), N = x.depth();
  TruncatedTensor out = TruncatedTensor::unit(d, N);
  TruncatedTensor power = TruncatedTensor::unit(d, N);
  double fact = 1.0;
  for (std::size_t n = 1; n <= N; ++n) {
    power = tensor_product(power, x);
    fact *= static_cast<double>(n);
    TruncatedTensor term = power;
    term *= 1.0 / fact;
    out += term;
  }
  return out;
}

/// Hilbert-Schmidt inner product of level k.
inline double level_inner(const TruncatedTensor& a, const TruncatedTensor& b, std::size_t k) {
  const auto& x = a.level(k);
  const auto& y = b.level(k);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

}  // namespace sigsde
