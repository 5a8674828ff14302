#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sigsde/error.hpp"

namespace sigsde {

/// Row-major L x d value matrix; row i is the state at times[i].
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Strictly increasing, finite timestamps, at least two of them.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    require(times_.size() >= 2, ErrorKind::invalid_argument,
            "time grid needs at least 2 nodes");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      require(std::isfinite(times_[i]), ErrorKind::invalid_argument,
              "time grid node " + std::to_string(i) + " is not finite");
      if (i > 0)
        require(times_[i] > times_[i - 1], ErrorKind::invalid_argument,
                "time grid not strictly increasing at node " + std::to_string(i));
    }
  }

  /// n evenly spaced nodes on [t0, t1].
  static TimeGrid uniform(double t0, double t1, std::size_t n) {
    require(n >= 2, ErrorKind::invalid_argument, "uniform grid needs n >= 2");
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
      t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    t.back() = t1;
    return TimeGrid(std::move(t));
  }

  /// Nodes t0, t0 + dt, ..., t0 + (n-1) dt.
  static TimeGrid stepped(double t0, double dt, std::size_t n) {
    require(dt > 0, ErrorKind::invalid_argument, "grid step must be positive");
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t0 + dt * static_cast<double>(i);
    return TimeGrid(std::move(t));
  }

  std::size_t size() const noexcept { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }
  const std::vector<double>& times() const noexcept { return times_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> times_;
};

/// Piecewise-linear path. When time_augmented() is set, channel 0 carries the
/// grid times and is strictly increasing.
class Path {
 public:
  Path() = default;

  Path(TimeGrid grid, Matrix values, bool time_augmented = false)
      : grid_(std::move(grid)), values_(std::move(values)), time_augmented_(time_augmented) {
    require(static_cast<std::size_t>(values_.rows()) == grid_.size(),
            ErrorKind::invalid_argument, "path values/grid length mismatch");
    require(values_.cols() >= 1, ErrorKind::invalid_argument, "path needs >= 1 channel");
    require(values_.allFinite(), ErrorKind::invalid_argument, "path values must be finite");
    if (time_augmented_) {
      for (Eigen::Index i = 1; i < values_.rows(); ++i)
        require(values_(i, 0) > values_(i - 1, 0), ErrorKind::invalid_argument,
                "time channel not strictly increasing");
    }
  }

  /// One-channel path from a list of values.
  static Path from_values(TimeGrid grid, const std::vector<double>& v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return Path(std::move(grid), std::move(m));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  const Matrix& values() const noexcept { return values_; }
  std::size_t length() const noexcept { return grid_.size(); }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  bool time_augmented() const noexcept { return time_augmented_; }
  /// Index of the first non-time channel.
  std::size_t first_value_channel() const noexcept { return time_augmented_ ? 1 : 0; }

  double operator()(std::size_t i, std::size_t c) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  }

 private:
  TimeGrid grid_;
  Matrix values_;
  bool time_augmented_ = false;
};

/// Non-empty sequence of paths sharing length and channel count.
class PathBatch {
 public:
  PathBatch() = default;
  explicit PathBatch(std::vector<Path> paths) : paths_(std::move(paths)) {
    require(!paths_.empty(), ErrorKind::invalid_argument, "path batch must be non-empty");
    for (std::size_t i = 1; i < paths_.size(); ++i) {
      require(paths_[i].length() == paths_[0].length() &&
                  paths_[i].channels() == paths_[0].channels(),
              ErrorKind::invalid_argument,
              "path batch not homogeneous at index " + std::to_string(i));
    }
  }

  std::size_t size() const noexcept { return paths_.size(); }
  bool empty() const noexcept { return paths_.empty(); }
  const Path& operator[](std::size_t i) const { return paths_[i]; }
  const std::vector<Path>& paths() const noexcept { return paths_; }
  std::size_t length() const { return paths_.at(0).length(); }
  std::size_t channels() const { return paths_.at(0).channels(); }

  auto begin() const { return paths_.begin(); }
  auto end() const { return paths_.end(); }

  /// Subset in the given index order.
  PathBatch select(const std::vector<std::size_t>& idx) const {
    std::vector<Path> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(paths_.at(i));
    return PathBatch(std::move(out));
  }

 private:
  std::vector<Path> paths_;
};

}  // namespace sigsde
