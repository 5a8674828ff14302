#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/parallel.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/rng.hpp"

namespace sigsde {

struct KsResult {
  double statistic = 0;
  double critical = 0;
  bool reject = false;
};

/// Asymptotic two-sample coefficient c(alpha) = sqrt(-ln(alpha / 2) / 2).
inline double ks_coefficient(double alpha) {
  require(alpha > 0 && alpha < 1, ErrorKind::invalid_argument, "ks alpha must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

/// Exact sup |F_a - F_b| by a merge scan over the sorted samples. Ties are
/// consumed on both sides before the gap is measured.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha = 0.05) {
  require(!a.empty() && !b.empty(), ErrorKind::invalid_argument, "ks test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  r.critical = ks_coefficient(alpha) * std::sqrt((n + m) / (n * m));
  r.reject = d > r.critical;
  return r;
}

/// Per-time averages over repeated subsampled KS tests. `rejection_rate` is
/// the fraction of repeats that rejected; it is a Type I error rate only when
/// both batches share a law.
struct KsReport {
  std::vector<std::size_t> time_index;
  std::vector<double> mean_ks;
  std::vector<double> rejection_rate;
  std::size_t repeats = 0;
  std::size_t batch = 0;
  double alpha = 0.05;
};

struct KsProtocol {
  std::vector<std::size_t> times{6, 19, 32, 44, 57};
  std::size_t repeats = 5000;
  std::size_t batch = 128;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  /// Channel whose marginals are tested; defaults to the first value channel.
  std::size_t channel = std::numeric_limits<std::size_t>::max();

  void validate() const {
    require(!times.empty(), ErrorKind::validation, "ks protocol needs >= 1 time index");
    require(repeats >= 1, ErrorKind::validation, "ks repeats must be >= 1");
    require(batch >= 1, ErrorKind::validation, "ks batch must be >= 1");
    require(alpha > 0 && alpha < 1, ErrorKind::validation, "ks alpha must lie in (0, 1)");
  }
};

namespace detail {

inline std::size_t ks_channel(const KsProtocol& p, const PathBatch& b) {
  const std::size_t c = p.channel == std::numeric_limits<std::size_t>::max() ? b[0].first_value_channel() : p.channel;
  require(c < b.channels(), ErrorKind::invalid_argument, "ks channel out of range");
  return c;
}

/// First k entries of a seeded shuffle of 0..n-1.
inline std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, n - 1);
    std::swap(idx[i], idx[u(rng)]);
  }
  idx.resize(k);
  return idx;
}

inline std::vector<double> marginal(const PathBatch& b, const std::vector<std::size_t>& idx, std::size_t t,
                                    std::size_t c) {
  std::vector<double> v;
  v.reserve(idx.size());
  for (std::size_t i : idx) v.push_back(b[i](t, c));
  return v;
}

template <class Draw>
KsReport run_ks_repeats(const PathBatch& a, const PathBatch& b, const KsProtocol& p, Draw&& draw) {
  p.validate();
  for (std::size_t t : p.times)
    require(t < a.length() && t < b.length(), ErrorKind::invalid_argument,
            "ks time index " + std::to_string(t) + " beyond path length");
  const std::size_t ca = ks_channel(p, a), cb = ks_channel(p, b);
  const std::size_t T = p.times.size();
  std::vector<double> stat(p.repeats * T);
  std::vector<char> rej(p.repeats * T);
  parallel_for(p.repeats, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(p.seed, static_cast<std::uint64_t>(r)));
    const auto [ia, ib] = draw(rng);
    for (std::size_t k = 0; k < T; ++k) {
      const auto res = ks_two_sample(marginal(a, ia, p.times[k], ca), marginal(b, ib, p.times[k], cb), p.alpha);
      stat[r * T + k] = res.statistic;
      rej[r * T + k] = res.reject;
    }
  });
  KsReport out;
  out.time_index = p.times;
  out.repeats = p.repeats;
  out.batch = p.batch;
  out.alpha = p.alpha;
  out.mean_ks.assign(T, 0.0);
  out.rejection_rate.assign(T, 0.0);
  for (std::size_t r = 0; r < p.repeats; ++r)
    for (std::size_t k = 0; k < T; ++k) {
      out.mean_ks[k] += stat[r * T + k];
      out.rejection_rate[k] += rej[r * T + k];
    }
  for (std::size_t k = 0; k < T; ++k) {
    out.mean_ks[k] /= static_cast<double>(p.repeats);
    out.rejection_rate[k] /= static_cast<double>(p.repeats);
  }
  return out;
}

}  // namespace detail

/// Each repeat draws `batch` paths without replacement from each side.
inline KsReport ks_marginal_protocol(const PathBatch& generated, const PathBatch& real, const KsProtocol& p) {
  require(generated.size() >= p.batch && real.size() >= p.batch, ErrorKind::invalid_argument,
          "ks batch " + std::to_string(p.batch) + " exceeds a batch of size " +
              std::to_string(std::min(generated.size(), real.size())));
  return detail::run_ks_repeats(generated, real, p, [&](Rng& rng) {
    auto ia = detail::draw_without_replacement(generated.size(), p.batch, rng);
    auto ib = detail::draw_without_replacement(real.size(), p.batch, rng);
    return std::pair{std::move(ia), std::move(ib)};
  });
}

/// Null calibration: both sides are disjoint subsamples of one batch.
inline KsReport ks_null_protocol(const PathBatch& batch, const KsProtocol& p) {
  require(batch.size() >= 2 * p.batch, ErrorKind::invalid_argument,
          "null protocol needs 2 * batch = " + std::to_string(2 * p.batch) + " paths");
  return detail::run_ks_repeats(batch, batch, p, [&](Rng& rng) {
    auto idx = detail::draw_without_replacement(batch.size(), 2 * p.batch, rng);
    std::vector<std::size_t> ib(idx.begin() + static_cast<std::ptrdiff_t>(p.batch), idx.end());
    idx.resize(p.batch);
    return std::pair{std::move(idx), std::move(ib)};
  });
}

struct AcfReport {
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// ACF_l = (1 / (N s^2)) sum_{t >= l} (x_t - mu)(x_{t-l} - mu), with the path's
/// own mean and population variance; returns nothing for a flat path.
inline std::vector<double> acf_path(const std::vector<double>& x, std::size_t max_lag) {
  require(x.size() > max_lag, ErrorKind::invalid_argument, "path length must exceed max_lag");
  const double N = static_cast<double>(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / N;
  double ss = 0, scale = 0;
  for (double v : x) {
    ss += (v - mu) * (v - mu);
    scale = std::max(scale, std::abs(v));
  }
  if (!(ss > 1e-28 * N * scale * scale)) return {};
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (std::size_t l = 1; l <= max_lag; ++l) {
    double s = 0;
    for (std::size_t t = l; t < x.size(); ++t) s += (x[t] - mu) * (x[t - l] - mu);
    out[l] = s / ss;
  }
  return out;
}

/// Batch mean and sample standard deviation of per-path ACFs of one channel
/// (default: first value channel). Flat paths are skipped and counted.
inline AcfReport acf(const PathBatch& batch, std::size_t max_lag,
                     std::size_t channel = std::numeric_limits<std::size_t>::max()) {
  const std::size_t c = channel == std::numeric_limits<std::size_t>::max() ? batch[0].first_value_channel() : channel;
  require(c < batch.channels(), ErrorKind::invalid_argument, "acf channel out of range");
  require(batch.length() > max_lag, ErrorKind::invalid_argument, "path length must exceed max_lag");
  AcfReport r;
  r.mean.assign(max_lag + 1, 0.0);
  r.std.assign(max_lag + 1, 0.0);
  std::vector<std::vector<double>> rows;
  for (const Path& p : batch) {
    std::vector<double> x(p.length());
    for (std::size_t t = 0; t < p.length(); ++t) x[t] = p(t, c);
    auto a = acf_path(x, max_lag);
    if (a.empty()) {
      ++r.skipped;
      continue;
    }
    rows.push_back(std::move(a));
  }
  r.used = rows.size();
  require(r.used >= 1, ErrorKind::degenerate_data, "acf: every path has zero variance");
  for (const auto& a : rows)
    for (std::size_t l = 0; l <= max_lag; ++l) r.mean[l] += a[l];
  for (double& m : r.mean) m /= static_cast<double>(r.used);
  if (r.used >= 2) {
    for (const auto& a : rows)
      for (std::size_t l = 0; l <= max_lag; ++l) r.std[l] += (a[l] - r.mean[l]) * (a[l] - r.mean[l]);
    for (double& s : r.std) s = std::sqrt(s / static_cast<double>(r.used - 1));
  }
  return r;
}

/// Pearson correlation; NaN when either side has zero variance.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::invalid_argument, "pearson needs equal sizes >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  const double tol = 1e-28 * n;
  if (!(saa > tol * std::max(1.0, ma * ma)) || !(sbb > tol * std::max(1.0, mb * mb))) return std::nan("");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Rows are lags, columns are value-channel pairs (c, c') in row-major order:
/// entry (l, c * C + c') is corr(r^c_t, (r^{c'}_{t-l})^2) pooled over the batch,
/// where r are consecutive differences. NaN marks a degenerate entry.
inline Matrix cross_corr_matrix(const PathBatch& batch, const std::vector<std::size_t>& lags = {0, 1, 2, 3, 4, 5}) {
  require(!lags.empty(), ErrorKind::invalid_argument, "cross-correlation needs >= 1 lag");
  const std::size_t c0 = batch[0].first_value_channel();
  const std::size_t C = batch.channels() - c0;
  const std::size_t R = batch.length() - 1;
  const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
  require(R >= max_lag + 2, ErrorKind::invalid_argument, "paths too short for the largest lag");
  Matrix out(static_cast<Eigen::Index>(lags.size()), static_cast<Eigen::Index>(C * C));
  for (std::size_t li = 0; li < lags.size(); ++li) {
    const std::size_t l = lags[li];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t cc = 0; cc < C; ++cc) {
        std::vector<double> a, b;
        a.reserve(batch.size() * (R - l));
        b.reserve(batch.size() * (R - l));
        for (const Path& p : batch)
          for (std::size_t t = l; t < R; ++t) {
            a.push_back(p(t + 1, c0 + c) - p(t, c0 + c));
            const double s = p(t + 1 - l, c0 + cc) - p(t - l, c0 + cc);
            b.push_back(s * s);
          }
        out(static_cast<Eigen::Index>(li), static_cast<Eigen::Index>(c * C + cc)) = pearson(a, b);
      }
  }
  return out;
}

/// Mean squared entrywise difference over entries present (non-NaN) in both.
inline double matrix_mse(const Matrix& A, const Matrix& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), ErrorKind::invalid_argument,
          "matrix_mse: shape mismatch " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + " vs " +
              std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  double s = 0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (std::isnan(A(i, j)) || std::isnan(B(i, j))) continue;
      s += (A(i, j) - B(i, j)) * (A(i, j) - B(i, j));
      ++n;
    }
  require(n > 0, ErrorKind::degenerate_data, "matrix_mse: no entry present in both matrices");
  return s / static_cast<double>(n);
}

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t skipped = 0;
};

/// Histogram on [-1, 1] of per-path correlations between the returns of two
/// channels. The closed right edge belongs to the last bin.
inline Histogram terminal_corr_hist(const PathBatch& batch, std::size_t ch_i, std::size_t ch_j, std::size_t bins) {
  require(bins >= 1, ErrorKind::invalid_argument, "histogram needs >= 1 bin");
  require(ch_i < batch.channels() && ch_j < batch.channels(), ErrorKind::invalid_argument,
          "histogram channel out of range");
  require(batch.length() >= 3, ErrorKind::invalid_argument, "histogram needs paths with >= 3 nodes");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t k = 0; k <= bins; ++k) h.edges.push_back(-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(bins));
  for (const Path& p : batch) {
    std::vector<double> a, b;
    for (std::size_t t = 0; t + 1 < p.length(); ++t) {
      a.push_back(p(t + 1, ch_i) - p(t, ch_i));
      b.push_back(p(t + 1, ch_j) - p(t, ch_j));
    }
    const double r = pearson(a, b);
    if (std::isnan(r)) {
      ++h.skipped;
      continue;
    }
    const auto k = static_cast<std::size_t>(std::floor((r + 1.0) / 2.0 * static_cast<double>(bins)));
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

}  // namespace sigsde
