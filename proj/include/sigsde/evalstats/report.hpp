#pragma once

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "sigsde/evalstats/stats.hpp"
#include "sigsde/paths/csv.hpp"

namespace sigsde {

inline nlohmann::json to_json(const KsReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < r.time_index.size(); ++k)
    rows.push_back({{"time_index", r.time_index[k]}, {"mean_ks", r.mean_ks[k]}, {"rejection_rate", r.rejection_rate[k]}});
  return {{"rows", rows}, {"repeats", r.repeats}, {"batch", r.batch}, {"alpha", r.alpha}};
}

inline nlohmann::json to_json(const AcfReport& r) {
  return {{"mean", r.mean}, {"std", r.std}, {"used", r.used}, {"skipped", r.skipped}};
}

/// Missing entries become null.
inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j)))
        row.push_back(nullptr);
      else
        row.push_back(m(i, j));
    }
    out.push_back(row);
  }
  return out;
}

inline nlohmann::json to_json(const Histogram& h) {
  return {{"edges", h.edges}, {"counts", h.counts}, {"skipped", h.skipped}};
}

/// One row per time index, Table-style: time_index,mean_ks,rejection_rate.
inline void write_ks_csv(std::ostream& os, const KsReport& r) {
  os << "time_index,mean_ks,rejection_rate\n";
  for (std::size_t k = 0; k < r.time_index.size(); ++k)
    os << r.time_index[k] << ',' << format_double(r.mean_ks[k]) << ',' << format_double(r.rejection_rate[k]) << '\n';
}

inline void write_acf_csv(std::ostream& os, const AcfReport& r) {
  os << "lag,mean,std\n";
  for (std::size_t l = 0; l < r.mean.size(); ++l)
    os << l << ',' << format_double(r.mean[l]) << ',' << format_double(r.std[l]) << '\n';
}

/// Lag-indexed rows; missing entries are written as empty cells.
inline void write_cross_corr_csv(std::ostream& os, const Matrix& m, const std::vector<std::size_t>& lags) {
  os << "lag";
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << ",pair" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << lags.at(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << ',';
      if (!std::isnan(m(i, j))) os << format_double(m(i, j));
    }
    os << '\n';
  }
}

}  // namespace sigsde
