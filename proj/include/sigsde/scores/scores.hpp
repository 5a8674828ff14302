#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/parallel.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/paths/transforms.hpp"
#include "sigsde/rng.hpp"
#include "sigsde/sigkernel/gram.hpp"
#include "sigsde/sigkernel/solver.hpp"

namespace sigsde {

/// An estimated score and, when requested, its gradient with respect to the
/// node values of every generated path (same order as the generated batch).
struct ScoreValue {
  double value = 0;
  std::optional<std::vector<Matrix>> gradient_wrt_generated;
};

/// One static kernel applied to paths whose non-time channels are multiplied
/// by `scale`. Several terms are summed with unit weights.
struct ScoreKernel {
  double scale = 1.0;
  StaticKernel kernel;
};

struct KernelSpec {
  std::vector<ScoreKernel> terms{ScoreKernel{}};
  SolverConfig solver;

  static KernelSpec single(const StaticKernel& k, const SolverConfig& cfg) {
    return {{ScoreKernel{1.0, k}}, cfg};
  }
};

namespace detail {

struct PairResult {
  double value = 0;
  Matrix dx, dy;
};

inline Matrix scaled_values(const Path& p, double c) {
  if (c == 1.0) return p.values();
  Matrix v = p.values();
  const auto c0 = static_cast<Eigen::Index>(p.first_value_channel());
  v.rightCols(v.cols() - c0) *= c;
  return v;
}

/// Chain rule through the scaling; zero gradient on the time channel.
inline void unscale_and_mask(Matrix& g, const Path& p, double c) {
  const auto c0 = static_cast<Eigen::Index>(p.first_value_channel());
  if (c != 1.0) g.rightCols(g.cols() - c0) *= c;
  if (p.time_augmented()) g.col(0).setZero();
}

/// Core of every batch score: coefficient-weighted sums of the generated
/// self-pairs (i < j) and of generated-vs-target pairs.
///   value = a_self * sum_{i<j} k(x_i, x_j) + a_cross * sum_{i,l} k(x_i, y_l)
inline ScoreValue weighted_pair_sum(const PathBatch& X, const std::vector<const Path*>& Y, double a_self,
                                    double a_cross, const ScoreKernel& term, const SolverConfig& solver,
                                    bool want_grad) {
  const std::size_t m = X.size(), n = Y.size();
  for (const Path* y : Y)
    require(y->channels() == X.channels(), ErrorKind::invalid_argument, "score: channel count mismatch");
  ScoreValue out;
  std::vector<Matrix> grads;
  if (want_grad)
    for (std::size_t i = 0; i < m; ++i) grads.push_back(Matrix::Zero(X[i].values().rows(), X[i].values().cols()));

  const auto self_pairs = upper_pairs(m, false);
  const std::size_t n_self = a_self != 0.0 ? self_pairs.size() : 0;
  const std::size_t n_cross = m * n;

  {
    const BoundStaticKernel k(term.kernel, X.channels());
    std::vector<Matrix> xs(m), ys(n);
    for (std::size_t i = 0; i < m; ++i) xs[i] = scaled_values(X[i], term.scale);
    for (std::size_t l = 0; l < n; ++l) ys[l] = scaled_values(*Y[l], term.scale);

    std::vector<PairResult> res(n_self + n_cross);
    parallel_for(res.size(), [&](std::size_t p) {
      if (p < n_self) {
        const auto [i, j] = self_pairs[p];
        res[p] = with_pair_context(i, j, [&] {
          auto kg = kernel_value_and_grad(xs[i], xs[j], k, solver, want_grad, want_grad);
          return PairResult{kg.value, std::move(kg.dx), std::move(kg.dy)};
        });
      } else {
        const std::size_t q = p - n_self, i = q / n, l = q % n;
        res[p] = with_pair_context(i, l, [&] {
          auto kg = kernel_value_and_grad(xs[i], ys[l], k, solver, want_grad, false);
          return PairResult{kg.value, std::move(kg.dx), Matrix()};
        });
      }
    });

    double self_sum = 0, cross_sum = 0;
    for (std::size_t p = 0; p < n_self; ++p) {
      self_sum += res[p].value;
      if (want_grad) {
        const auto [i, j] = self_pairs[p];
        grads[i] += a_self * res[p].dx;
        grads[j] += a_self * res[p].dy;
      }
    }
    for (std::size_t q = 0; q < n_cross; ++q) {
      cross_sum += res[n_self + q].value;
      if (want_grad) grads[q / n] += a_cross * res[n_self + q].dx;
    }
    out.value += a_self * self_sum + a_cross * cross_sum;
  }
  if (want_grad) {
    for (std::size_t i = 0; i < m; ++i) unscale_and_mask(grads[i], X[i], term.scale);
    out.gradient_wrt_generated = std::move(grads);
  }
  return out;
}

}  // namespace detail

/// Unbiased estimator of the expected score against several targets:
///   (1/(m(m-1))) sum_{i!=j} k(x_i, x_j) - (2/(m n)) sum_{i,l} k(x_i, y_l).
/// With a single target this is the score estimator itself.
inline ScoreValue loss_unconditional(const PathBatch& generated, const std::vector<const Path*>& targets,
                                     const KernelSpec& spec, bool want_grad = false) {
  const std::size_t m = generated.size(), n = targets.size();
  require(m >= 2, ErrorKind::invalid_argument, "score estimator needs m >= 2 generated paths");
  require(n >= 1, ErrorKind::invalid_argument, "score estimator needs >= 1 target path");
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double a_self = 2.0 / (md * (md - 1.0));
  const double a_cross = -2.0 / (md * nd);

  ScoreValue total;
  std::vector<Matrix> grads;
  for (const ScoreKernel& term : spec.terms) {
    ScoreValue s = detail::weighted_pair_sum(generated, targets, a_self, a_cross, term, spec.solver, want_grad);
    total.value += s.value;
    if (want_grad) {
      auto& g = *s.gradient_wrt_generated;
      if (grads.empty()) {
        grads = std::move(g);
      } else {
        for (std::size_t i = 0; i < m; ++i) grads[i] += g[i];
      }
    }
  }
  if (want_grad) total.gradient_wrt_generated = std::move(grads);
  return total;
}

inline ScoreValue loss_unconditional(const PathBatch& generated, const PathBatch& real_batch,
                                     const KernelSpec& spec, bool want_grad = false) {
  require(real_batch.size() >= 1, ErrorKind::invalid_argument, "loss needs real paths");
  std::vector<const Path*> t;
  for (const auto& p : real_batch) t.push_back(&p);
  return loss_unconditional(generated, t, spec, want_grad);
}

inline ScoreValue loss_unconditional(const PathBatch& generated, const PathBatch& real_batch,
                                     const StaticKernel& sk, const SolverConfig& cfg, bool want_grad = false) {
  return loss_unconditional(generated, real_batch, KernelSpec::single(sk, cfg), want_grad);
}

/// Unbiased signature kernel score estimator of a single observation y.
inline ScoreValue score_unbiased(const PathBatch& X, const Path& y, const KernelSpec& spec,
                                 bool want_grad = false) {
  return loss_unconditional(X, std::vector<const Path*>{&y}, spec, want_grad);
}

inline ScoreValue score_unbiased(const PathBatch& X, const Path& y, const StaticKernel& sk,
                                 const SolverConfig& cfg, bool want_grad = false) {
  return score_unbiased(X, y, KernelSpec::single(sk, cfg), want_grad);
}

/// Score estimator read off precomputed Gram blocks: Kxx (m x m) among the
/// generated paths and kxy (length m) against the observation.
inline double score_unbiased_from_gram(const Matrix& Kxx, const Vector& kxy) {
  const auto m = Kxx.rows();
  require(m >= 2, ErrorKind::invalid_argument, "score estimator needs m >= 2");
  const double md = static_cast<double>(m);
  double off = Kxx.sum() - Kxx.diagonal().sum();
  return off / (md * (md - 1.0)) - 2.0 * kxy.sum() / md;
}

/// U-statistic mean of off-diagonal entries of a square Gram block.
inline double offdiag_mean(const Matrix& K) {
  const double n = static_cast<double>(K.rows());
  require(K.rows() >= 2, ErrorKind::invalid_argument, "U-statistic needs n >= 2");
  return (K.sum() - K.diagonal().sum()) / (n * (n - 1.0));
}

inline double mmd_sq_unbiased_from_gram(const Matrix& Kxx, const Matrix& Kyy, const Matrix& Kxy) {
  return offdiag_mean(Kxx) + offdiag_mean(Kyy) - 2.0 * Kxy.mean();
}

/// Biased (V-statistic) squared MMD.
inline double mmd_sq_biased_from_gram(const Matrix& Kxx, const Matrix& Kyy, const Matrix& Kxy) {
  return Kxx.mean() + Kyy.mean() - 2.0 * Kxy.mean();
}

inline double mmd_sq_unbiased(const PathBatch& X, const PathBatch& Y, const StaticKernel& sk,
                              const SolverConfig& cfg) {
  require(X.size() >= 2 && Y.size() >= 2, ErrorKind::invalid_argument, "MMD estimator needs m, n >= 2");
  const auto Kxx = gram(X, X, sk, cfg);
  const auto Kyy = gram(Y, Y, sk, cfg);
  const auto Kxy = gram(X, Y, sk, cfg);
  return mmd_sq_unbiased_from_gram(Kxx.entries, Kyy.entries, Kxy.entries);
}

/// Real-real U-statistic term (1/(n(n-1))) sum_{l != l'} k(y_l, y_l'),
/// summed over kernel terms. Adding it to loss_unconditional gives MMD^2.
inline double real_real_term(const PathBatch& Y, const KernelSpec& spec) {
  require(Y.size() >= 2, ErrorKind::invalid_argument, "real-real term needs n >= 2");
  double v = 0;
  for (const auto& term : spec.terms) {
    const PathBatch scaled = term.scale == 1.0 ? Y : map_batch(Y, [&](const Path& p) { return scale(p, term.scale); });
    v += offdiag_mean(gram(scaled, scaled, term.kernel, spec.solver).entries);
  }
  return v;
}

/// Result of a two-sample permutation test on the biased MMD statistic.
struct PermutationTest {
  double statistic = 0;
  double p_value = 1;
  bool reject = false;
};

/// Permutation test from the pooled Gram matrix (first m rows are sample X).
/// p = (1 + #{perm stat >= observed}) / (1 + permutations).
inline PermutationTest mmd_permutation_test(const Matrix& pooled, std::size_t m, std::size_t permutations,
                                            double alpha, Rng& rng) {
  const std::size_t N = static_cast<std::size_t>(pooled.rows());
  require(m >= 1 && m < N, ErrorKind::invalid_argument, "permutation test: bad split");
  auto stat = [&](const std::vector<std::size_t>& idx) {
    const std::size_t n = N - m;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = 0; b < N; ++b) {
        const double v = pooled(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
        const bool ax = a < m, bx = b < m;
        if (ax && bx) sxx += v;
        else if (!ax && !bx) syy += v;
        else sxy += v;
      }
    const double md = static_cast<double>(m), nd = static_cast<double>(n);
    return sxx / (md * md) + syy / (nd * nd) - sxy / (md * nd);
  };
  std::vector<std::size_t> idx(N);
  for (std::size_t i = 0; i < N; ++i) idx[i] = i;
  PermutationTest out;
  out.statistic = stat(idx);
  std::size_t exceed = 0;
  for (std::size_t p = 0; p < permutations; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng);
    if (stat(idx) >= out.statistic) ++exceed;
  }
  out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
  out.reject = out.p_value <= alpha;
  return out;
}

inline PermutationTest mmd_permutation_test(const PathBatch& X, const PathBatch& Y, const StaticKernel& sk,
                                            const SolverConfig& cfg, std::size_t permutations, double alpha,
                                            Rng& rng) {
  std::vector<Path> pooled(X.paths());
  pooled.insert(pooled.end(), Y.paths().begin(), Y.paths().end());
  const PathBatch P(std::move(pooled));
  return mmd_permutation_test(gram(P, P, sk, cfg).entries, X.size(), permutations, alpha, rng);
}

/// A conditioning path with its observed continuation.
struct ConditionalPair {
  Path x;
  Path y;
};

/// Draws m conditional samples for pair i given its conditioning path.
using ConditionalSampler = std::function<PathBatch(const Path& x, std::size_t pair_index, std::size_t m)>;

/// (1/n) sum_i score(P(. | x_i), y_i) with m samples per pair. Gradients are
/// returned pair-major: entry i*m + s belongs to sample s of pair i.
inline ScoreValue loss_conditional(const std::vector<ConditionalPair>& pairs, const ConditionalSampler& sampler,
                                   std::size_t m, const KernelSpec& spec, bool want_grad = false) {
  require(m >= 2, ErrorKind::invalid_argument, "conditional fan-out must be >= 2");
  require(!pairs.empty(), ErrorKind::invalid_argument, "conditional loss needs >= 1 pair");
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  ScoreValue out;
  std::vector<Matrix> grads;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PathBatch gen = sampler(pairs[i].x, i, m);
    require(gen.size() == m, ErrorKind::invalid_state, "sampler returned wrong batch size");
    ScoreValue s = score_unbiased(gen, pairs[i].y, spec, want_grad);
    out.value += inv_n * s.value;
    if (want_grad)
      for (auto& g : *s.gradient_wrt_generated) grads.push_back(inv_n * g);
  }
  if (want_grad) out.gradient_wrt_generated = std::move(grads);
  return out;
}

}  // namespace sigsde
