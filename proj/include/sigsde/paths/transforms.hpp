#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"

namespace sigsde {

/// Per-channel terminal-value statistics of the non-time channels.
struct StandardizationStats {
  Vector mu_T;
  Vector sigma_T;
};

/// Exact linear interpolant of `path` evaluated on `target`. Target nodes
/// that coincide with source nodes reproduce the source rows bit for bit.
inline Path linear_interpolate(const Path& path, const TimeGrid& target) {
  const auto& src = path.grid().times();
  const double lo = src.front(), hi = src.back();
  const auto n = static_cast<Eigen::Index>(target.size());
  Matrix out(n, path.values().cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = target[static_cast<std::size_t>(k)];
    if (t < lo || t > hi)
      fail(ErrorKind::out_of_range, "interpolation time " + std::to_string(t) +
                                        " outside [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
    auto it = std::lower_bound(src.begin(), src.end(), t);
    auto j = static_cast<Eigen::Index>(it - src.begin());
    if (*it == t) {
      out.row(k) = path.values().row(j);
      continue;
    }
    const double t0 = src[static_cast<std::size_t>(j - 1)], t1 = src[static_cast<std::size_t>(j)];
    const double w = (t - t0) / (t1 - t0);
    out.row(k) = (1.0 - w) * path.values().row(j - 1) + w * path.values().row(j);
  }
  if (path.time_augmented())
    for (Eigen::Index k = 0; k < n; ++k) out(k, 0) = target[static_cast<std::size_t>(k)];
  return Path(target, std::move(out), path.time_augmented());
}

/// Prepends the grid times as channel 0.
inline Path time_augment(const Path& path) {
  require(!path.time_augmented(), ErrorKind::invalid_state, "path is already time-augmented");
  const auto L = static_cast<Eigen::Index>(path.length());
  Matrix out(L, path.values().cols() + 1);
  for (Eigen::Index i = 0; i < L; ++i) out(i, 0) = path.grid()[static_cast<std::size_t>(i)];
  out.rightCols(path.values().cols()) = path.values();
  return Path(path.grid(), std::move(out), true);
}

/// Shifts the non-time channels so that the first row is zero.
inline Path translate_to_zero(const Path& path) {
  Matrix out = path.values();
  const auto c0 = static_cast<Eigen::Index>(path.first_value_channel());
  const auto nc = out.cols() - c0;
  const Eigen::RowVectorXd first = out.row(0).segment(c0, nc);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i).segment(c0, nc) -= first;
  return Path(path.grid(), std::move(out), path.time_augmented());
}

/// Multiplies the non-time channels by c > 0.
inline Path scale(const Path& path, double c) {
  require(c > 0 && std::isfinite(c), ErrorKind::invalid_argument, "scale factor must be positive");
  Matrix out = path.values();
  const auto c0 = static_cast<Eigen::Index>(path.first_value_channel());
  out.rightCols(out.cols() - c0) *= c;
  return Path(path.grid(), std::move(out), path.time_augmented());
}

/// Maps the time channel (and the grid) affinely onto [0, 1].
inline Path time_normalize(const Path& path) {
  require(path.time_augmented(), ErrorKind::invalid_state,
          "time_normalize needs a time-augmented path");
  const double t0 = path.grid().front(), t1 = path.grid().back();
  const double span = t1 - t0;
  std::vector<double> t(path.length());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (path.grid()[i] - t0) / span;
  t.front() = 0.0;
  t.back() = 1.0;
  Matrix out = path.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, 0) = t[static_cast<std::size_t>(i)];
  return Path(TimeGrid(std::move(t)), std::move(out), true);
}

/// Lead-lag embedding: 2L-1 rows, lead block in channels [0, d), lag block in
/// [d, 2d). Row 2i is (x_i, x_i), row 2i+1 is (x_{i+1}, x_i). The result carries
/// no time tag; its grid interleaves the source nodes with segment midpoints.
inline Path lead_lag(const Path& path) {
  const auto L = static_cast<Eigen::Index>(path.length());
  const auto d = path.values().cols();
  const auto& x = path.values();
  Matrix out(2 * L - 1, 2 * d);
  std::vector<double> t(static_cast<std::size_t>(2 * L - 1));
  for (Eigen::Index i = 0; i < L; ++i) {
    out.row(2 * i).head(d) = x.row(i);
    out.row(2 * i).tail(d) = x.row(i);
    t[static_cast<std::size_t>(2 * i)] = path.grid()[static_cast<std::size_t>(i)];
    if (i + 1 < L) {
      out.row(2 * i + 1).head(d) = x.row(i + 1);
      out.row(2 * i + 1).tail(d) = x.row(i);
      t[static_cast<std::size_t>(2 * i + 1)] =
          0.5 * (path.grid()[static_cast<std::size_t>(i)] + path.grid()[static_cast<std::size_t>(i + 1)]);
    }
  }
  return Path(TimeGrid(std::move(t)), std::move(out), false);
}

/// Terminal-value mean and population standard deviation per non-time channel.
inline StandardizationStats fit_standardization(const PathBatch& batch) {
  require(!batch.empty(), ErrorKind::invalid_argument, "cannot fit on an empty batch");
  const auto c0 = static_cast<Eigen::Index>(batch[0].first_value_channel());
  const auto nc = static_cast<Eigen::Index>(batch.channels()) - c0;
  const auto last = static_cast<Eigen::Index>(batch.length()) - 1;
  const double n = static_cast<double>(batch.size());
  Vector mu = Vector::Zero(nc);
  for (const auto& p : batch) mu += p.values().row(last).segment(c0, nc).transpose();
  mu /= n;
  Vector var = Vector::Zero(nc);
  for (const auto& p : batch)
    var += (p.values().row(last).segment(c0, nc).transpose() - mu).array().square().matrix();
  var /= n;
  StandardizationStats s{mu, var.cwiseSqrt()};
  for (Eigen::Index c = 0; c < nc; ++c)
    require(s.sigma_T(c) > 0, ErrorKind::degenerate_data,
            "zero terminal variance in channel " + std::to_string(c + c0));
  return s;
}

/// Applies x -> (x - mu_T) / sigma_T to every non-time channel.
inline Path standardize(const Path& path, const StandardizationStats& stats) {
  const auto c0 = static_cast<Eigen::Index>(path.first_value_channel());
  const auto nc = path.values().cols() - c0;
  require(stats.mu_T.size() == nc && stats.sigma_T.size() == nc, ErrorKind::invalid_argument,
          "standardization stats have wrong channel count");
  for (Eigen::Index c = 0; c < nc; ++c)
    require(stats.sigma_T(c) > 0, ErrorKind::degenerate_data, "sigma_T must be positive");
  Matrix out = path.values();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index c = 0; c < nc; ++c)
      out(i, c0 + c) = (out(i, c0 + c) - stats.mu_T(c)) / stats.sigma_T(c);
  return Path(path.grid(), std::move(out), path.time_augmented());
}

inline PathBatch standardize(const PathBatch& batch, const StandardizationStats& stats) {
  std::vector<Path> out;
  out.reserve(batch.size());
  for (const auto& p : batch) out.push_back(standardize(p, stats));
  return PathBatch(std::move(out));
}

/// Shifts grid (and time channel) so the path starts at time 0.
inline Path rebase_time(const Path& path) {
  const double t0 = path.grid().front();
  std::vector<double> t(path.grid().times());
  for (auto& v : t) v -= t0;
  Matrix out = path.values();
  if (path.time_augmented())
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, 0) = t[static_cast<std::size_t>(i)];
  return Path(TimeGrid(std::move(t)), std::move(out), path.time_augmented());
}

/// Consecutive windows of `window` nodes every `step` nodes, each re-based to
/// start at time 0.
inline PathBatch stride_split(const Path& series, std::size_t window, std::size_t step) {
  require(window >= 2, ErrorKind::invalid_argument, "window must be >= 2");
  require(step >= 1, ErrorKind::invalid_argument, "step must be >= 1");
  require(window <= series.length(), ErrorKind::out_of_range,
          "window " + std::to_string(window) + " exceeds series length " +
              std::to_string(series.length()));
  std::vector<Path> out;
  for (std::size_t s = 0; s + window <= series.length(); s += step) {
    std::vector<double> t(series.grid().times().begin() + static_cast<std::ptrdiff_t>(s),
                          series.grid().times().begin() + static_cast<std::ptrdiff_t>(s + window));
    Matrix v = series.values().middleRows(static_cast<Eigen::Index>(s),
                                          static_cast<Eigen::Index>(window));
    out.push_back(rebase_time(Path(TimeGrid(std::move(t)), std::move(v), series.time_augmented())));
  }
  return PathBatch(std::move(out));
}

/// Keeps windows whose time span is at most the (lower) median span and
/// resamples each onto the evenly spaced grid [0, median span] with the
/// original window length. Windows shorter than the median are held flat
/// after their last observation.
inline PathBatch median_terminal_filter(const std::vector<Path>& windows) {
  require(!windows.empty(), ErrorKind::invalid_argument, "median filter needs >= 1 window");
  std::vector<double> spans;
  spans.reserve(windows.size());
  for (const auto& w : windows) spans.push_back(w.grid().back() - w.grid().front());
  std::vector<double> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];
  const std::size_t L = windows.front().length();
  const TimeGrid common = TimeGrid::uniform(0.0, median, L);

  std::vector<Path> out;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    if (spans[k] > median) continue;
    const Path w = rebase_time(windows[k]);
    require(w.length() == L, ErrorKind::invalid_argument, "windows must share a length");
    std::vector<double> clipped(L);
    for (std::size_t i = 0; i < L; ++i) clipped[i] = std::min(common[i], w.grid().back());
    Matrix v(static_cast<Eigen::Index>(L), w.values().cols());
    // Interpolate at clipped times; clipped values may repeat so interpolate row by row.
    const auto& src = w.grid().times();
    for (std::size_t i = 0; i < L; ++i) {
      const double t = clipped[i];
      auto it = std::lower_bound(src.begin(), src.end(), t);
      auto j = static_cast<Eigen::Index>(it - src.begin());
      if (*it == t) {
        v.row(static_cast<Eigen::Index>(i)) = w.values().row(j);
      } else {
        const double t0 = src[static_cast<std::size_t>(j - 1)], t1 = src[static_cast<std::size_t>(j)];
        const double a = (t - t0) / (t1 - t0);
        v.row(static_cast<Eigen::Index>(i)) = (1 - a) * w.values().row(j - 1) + a * w.values().row(j);
      }
    }
    if (w.time_augmented())
      for (std::size_t i = 0; i < L; ++i) v(static_cast<Eigen::Index>(i), 0) = common[i];
    out.emplace_back(common, std::move(v), w.time_augmented());
  }
  return PathBatch(std::move(out));
}

inline PathBatch median_terminal_filter(const PathBatch& windows) {
  return median_terminal_filter(windows.paths());
}

/// Maps a per-path transform over a batch.
template <class F>
PathBatch map_batch(const PathBatch& batch, F&& f) {
  std::vector<Path> out;
  out.reserve(batch.size());
  for (const auto& p : batch) out.push_back(f(p));
  return PathBatch(std::move(out));
}

}  // namespace sigsde
