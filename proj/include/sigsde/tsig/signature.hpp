#pragma once

#include <cstddef>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/tsig/tensor.hpp"

namespace sigsde {

/// Signature of a piecewise-linear path truncated at some depth.
struct TruncatedSignature {
  TruncatedTensor tensor;

  std::size_t depth() const { return tensor.depth(); }
  const std::vector<double>& level(std::size_t k) const { return tensor.level(k); }
};

/// Truncated tensor logarithm of a signature. Levels 1..M are meaningful;
/// level 0 is identically zero and is dropped from the flattened view.
struct LogSignature {
  TruncatedTensor tensor;

  std::size_t depth() const { return tensor.depth(); }
  std::vector<double> flatten() const { return tensor.flatten(1); }
};

/// Multiplies `sig` in place on the right by exp(delta).
inline void chen_append_segment(TruncatedTensor& sig, const double* delta) {
  const std::size_t d = sig.dim(), N = sig.depth();
  // Powers delta^{(x)j}/j! for j = 1..N.
  std::vector<std::vector<double>> seg(N + 1);
  seg[0] = {1.0};
  for (std::size_t j = 1; j <= N; ++j) {
    seg[j].resize(seg[j - 1].size() * d);
    const double inv_j = 1.0 / static_cast<double>(j);
    for (std::size_t a = 0; a < seg[j - 1].size(); ++a)
      for (std::size_t b = 0; b < d; ++b) seg[j][a * d + b] = seg[j - 1][a] * delta[b] * inv_j;
  }
  // Top level first so lower levels still hold the old values.
  for (std::size_t k = N; k >= 1; --k) {
    auto& dst = sig.level(k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& left = sig.level(i);
      const auto& right = seg[k - i];
      const std::size_t rs = right.size();
      for (std::size_t p = 0; p < left.size(); ++p) {
        const double lp = left[p];
        if (lp == 0.0) continue;
        double* row = dst.data() + p * rs;
        for (std::size_t q = 0; q < rs; ++q) row[q] += lp * right[q];
      }
    }
  }
}

/// Exact signature of the piecewise-linear interpolant, built segment by
/// segment with Chen's identity in path order.
inline TruncatedSignature signature(const Path& path, std::size_t depth) {
  require(depth >= 1, ErrorKind::invalid_argument, "signature depth must be >= 1");
  require(path.length() >= 2, ErrorKind::invalid_argument, "signature needs >= 2 nodes");
  const std::size_t d = path.channels();
  TruncatedTensor sig = TruncatedTensor::unit(d, depth);
  std::vector<double> delta(d);
  for (std::size_t i = 0; i + 1 < path.length(); ++i) {
    for (std::size_t c = 0; c < d; ++c) delta[c] = path(i + 1, c) - path(i, c);
    chen_append_segment(sig, delta.data());
  }
  return {std::move(sig)};
}

inline LogSignature log_signature(const Path& path, std::size_t depth) {
  return {tensor_log(signature(path, depth).tensor)};
}

/// Number of entries in levels 1..depth over dimension dim.
inline std::size_t log_signature_length(std::size_t dim, std::size_t depth) {
  std::size_t n = 0, p = 1;
  for (std::size_t k = 1; k <= depth; ++k) {
    p *= dim;
    n += p;
  }
  return n;
}

/// Sum over levels 0..depth of the level-wise Hilbert-Schmidt inner products.
inline double truncated_kernel(const TruncatedSignature& sx, const TruncatedSignature& sy) {
  sx.tensor.check_compatible(sy.tensor);
  double s = 0;
  for (std::size_t k = 0; k <= sx.depth(); ++k) s += level_inner(sx.tensor, sy.tensor, k);
  return s;
}

inline double truncated_kernel(const Path& x, const Path& y, std::size_t depth) {
  require(x.channels() == y.channels(), ErrorKind::invalid_argument,
          "truncated_kernel: channel count mismatch");
  return truncated_kernel(signature(x, depth), signature(y, depth));
}

}  // namespace sigsde
