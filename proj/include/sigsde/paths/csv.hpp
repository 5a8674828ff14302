#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"

namespace sigsde {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) fail(ErrorKind::parse, where + ": bad number '" + s + "'");
  return v;
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}
}  // namespace detail

/// Writes paths as `series_id,t,ch0,ch1,...`. The time channel of a
/// time-augmented path is not written; it equals the `t` column.
inline void write_paths_csv(std::ostream& os, const std::vector<Path>& paths) {
  require(!paths.empty(), ErrorKind::invalid_argument, "nothing to write");
  const std::size_t c0 = paths[0].first_value_channel();
  const std::size_t nc = paths[0].channels() - c0;
  os << "series_id,t";
  for (std::size_t c = 0; c < nc; ++c) os << ",ch" << c;
  os << '\n';
  for (std::size_t s = 0; s < paths.size(); ++s) {
    const Path& p = paths[s];
    require(p.channels() - p.first_value_channel() == nc, ErrorKind::invalid_argument,
            "paths must share channel count");
    for (std::size_t i = 0; i < p.length(); ++i) {
      os << s << ',' << format_double(p.grid()[i]);
      for (std::size_t c = p.first_value_channel(); c < p.channels(); ++c)
        os << ',' << format_double(p(i, c));
      os << '\n';
    }
  }
}

inline void write_paths_csv(std::ostream& os, const PathBatch& batch) {
  write_paths_csv(os, batch.paths());
}

/// Reads the CSV path format. Paths are returned without a time tag, in
/// order of first appearance. Rows of one series must be contiguous with
/// strictly increasing times.
inline std::vector<Path> read_paths_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::parse, "line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "series_id" || header[1] != "t")
    fail(ErrorKind::parse, "line 1: header must be series_id,t,ch0,...");
  for (std::size_t c = 2; c < header.size(); ++c)
    if (header[c] != "ch" + std::to_string(c - 2))
      fail(ErrorKind::parse, "line 1: expected column ch" + std::to_string(c - 2));
  const std::size_t nc = header.size() - 2;

  std::vector<Path> out;
  std::vector<std::string> seen;
  std::string current;
  std::vector<double> times;
  std::vector<double> vals;
  std::size_t lineno = 1;
  std::size_t group_start = 0;

  auto flush = [&] {
    if (current.empty() && times.empty()) return;
    if (times.size() < 2)
      fail(ErrorKind::parse, "line " + std::to_string(group_start) + ": series '" + current +
                                 "' has fewer than 2 rows");
    Matrix m(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(nc));
    for (std::size_t i = 0; i < times.size(); ++i)
      for (std::size_t c = 0; c < nc; ++c)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = vals[i * nc + c];
    out.emplace_back(TimeGrid(times), std::move(m));
    times.clear();
    vals.clear();
  };

  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    auto cells = detail::split_csv_line(line);
    if (cells.size() != nc + 2)
      fail(ErrorKind::parse, where + ": expected " + std::to_string(nc + 2) + " fields, got " +
                                 std::to_string(cells.size()));
    if (cells[0].empty()) fail(ErrorKind::parse, where + ": empty series_id");
    if (cells[0] != current || times.empty()) {
      if (!times.empty()) flush();
      for (const auto& s : seen)
        if (s == cells[0])
          fail(ErrorKind::parse, where + ": series '" + cells[0] + "' is not contiguous");
      seen.push_back(cells[0]);
      current = cells[0];
      group_start = lineno;
    }
    const double t = parse_double(cells[1], where);
    if (!std::isfinite(t)) fail(ErrorKind::parse, where + ": non-finite time");
    if (!times.empty() && !(t > times.back()))
      fail(ErrorKind::parse, where + ": time not strictly increasing within series '" + current + "'");
    times.push_back(t);
    for (std::size_t c = 0; c < nc; ++c) {
      const double v = parse_double(cells[c + 2], where);
      if (!std::isfinite(v)) fail(ErrorKind::parse, where + ": non-finite value");
      vals.push_back(v);
    }
  }
  flush();
  if (out.empty()) fail(ErrorKind::parse, "no data rows");
  return out;
}

inline std::vector<Path> load_paths_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::io, "cannot open " + file);
  try {
    return read_paths_csv(in);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) fail(ErrorKind::parse, file + ": " + e.what());
    throw;
  }
}

inline void save_paths_csv(const std::string& file, const PathBatch& batch) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + file);
  write_paths_csv(out, batch);
  if (!out) fail(ErrorKind::io, "write failed for " + file);
}

}  // namespace sigsde
