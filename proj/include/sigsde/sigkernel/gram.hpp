#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/parallel.hpp"
#include "sigsde/paths/csv.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/sigkernel/solver.hpp"

namespace sigsde {

struct GramMatrix {
  Matrix entries;
  bool symmetric = false;
};

namespace detail {
template <class F>
auto with_pair_context(std::size_t i, std::size_t j, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), "pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
  }
}

/// Upper-triangle index pairs (i <= j) of an n x n matrix, row-major.
inline std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t n, bool diagonal) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = diagonal ? i : i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}
}  // namespace detail

/// Pairwise signature kernels. Passing the same batch object twice computes
/// the upper triangle only and mirrors it.
inline GramMatrix gram(const PathBatch& X, const PathBatch& Y, const StaticKernel& sk,
                       const SolverConfig& cfg) {
  require(X.channels() == Y.channels(), ErrorKind::invalid_argument, "gram: channel count mismatch");
  const BoundStaticKernel k(sk, X.channels());
  GramMatrix G;
  G.entries.resize(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(Y.size()));
  if (&X == &Y) {
    G.symmetric = true;
    const auto pairs = detail::upper_pairs(X.size(), true);
    std::vector<double> vals(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
      const auto [i, j] = pairs[p];
      vals[p] = detail::with_pair_context(i, j, [&] { return kernel_eval(X[i].values(), X[j].values(), k, cfg); });
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(pairs[p].first), j = static_cast<Eigen::Index>(pairs[p].second);
      G.entries(i, j) = G.entries(j, i) = vals[p];
    }
    return G;
  }
  const std::size_t n = Y.size();
  parallel_for(X.size() * n, [&](std::size_t p) {
    const std::size_t i = p / n, j = p % n;
    G.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        detail::with_pair_context(i, j, [&] { return kernel_eval(X[i].values(), Y[j].values(), k, cfg); });
  });
  return G;
}

inline GramMatrix gram_self(const PathBatch& X, const StaticKernel& sk, const SolverConfig& cfg) {
  return gram(X, X, sk, cfg);
}

inline void write_gram_csv(std::ostream& os, const GramMatrix& G) {
  for (Eigen::Index i = 0; i < G.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.entries.cols(); ++j) {
      if (j) os << ',';
      os << format_double(G.entries(i, j));
    }
    os << '\n';
  }
}

}  // namespace sigsde
