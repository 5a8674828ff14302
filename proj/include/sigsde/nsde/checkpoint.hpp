#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "sigsde/error.hpp"
#include "sigsde/nsde/neural_sde.hpp"

namespace sigsde {

inline constexpr int checkpoint_version = 1;

namespace detail {

inline std::string hex_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

inline double parse_hex_double(const std::string& s, std::size_t line) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto r = std::from_chars(first, last, v, std::chars_format::hex);
  if (r.ec != std::errc() || r.ptr != last)
    fail(ErrorKind::parse, "checkpoint line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Text checkpoint; layout described in README.md. Doubles are written as
/// C99 hex floats so a load reproduces the parameters bit for bit.
inline void write_checkpoint(std::ostream& os, const NeuralSdeParams& p) {
  const SdeDims& d = p.dims;
  os << "sigsde-checkpoint " << checkpoint_version << '\n';
  os << "dims " << d.d_a << ' ' << d.d_y << ' ' << d.d_w << ' ' << d.d_x << ' ' << d.d_c << '\n';
  os << "hidden " << d.hidden.size();
  for (auto h : d.hidden) os << ' ' << h;
  os << '\n';
  os << "flags " << int(d.learn_initial) << ' ' << int(d.time_input) << ' ' << to_string(d.drift_final) << ' '
     << to_string(d.diffusion_final) << '\n';
  visit_tensors(p, [&](const std::string& name, const auto& t) {
    const Eigen::Index rows = t.rows(), cols = t.cols();
    os << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (j) os << ' ';
        os << detail::hex_double(t(i, j));
      }
      os << '\n';
    }
  });
  os << "end\n";
}

inline NeuralSdeParams read_checkpoint(std::istream& is) {
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::istringstream {
    if (!std::getline(is, line)) fail(ErrorKind::parse, "checkpoint truncated after line " + std::to_string(line_no));
    ++line_no;
    return std::istringstream(line);
  };
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::parse, "checkpoint line " + std::to_string(line_no) + ": " + what);
  };

  std::string tag;
  int version = 0;
  if (!(next() >> tag >> version) || tag != "sigsde-checkpoint") bad("missing header");
  if (version != checkpoint_version) bad("unsupported version " + std::to_string(version));

  SdeDims d;
  {
    auto s = next();
    if (!(s >> tag >> d.d_a >> d.d_y >> d.d_w >> d.d_x >> d.d_c) || tag != "dims") bad("expected dims");
  }
  {
    auto s = next();
    std::size_t n = 0;
    if (!(s >> tag >> n) || tag != "hidden" || n > 64) bad("expected hidden");
    d.hidden.assign(n, 0);
    for (auto& h : d.hidden)
      if (!(s >> h)) bad("hidden width missing");
  }
  {
    auto s = next();
    int li = 0, ti = 0;
    std::string df, sf;
    if (!(s >> tag >> li >> ti >> df >> sf) || tag != "flags") bad("expected flags");
    d.learn_initial = li != 0;
    d.time_input = ti != 0;
    d.drift_final = final_activation_from_string(df);
    d.diffusion_final = final_activation_from_string(sf);
  }
  try {
    d.validate();
  } catch (const Error& e) {
    bad(e.what());
  }

  NeuralSdeParams p = NeuralSdeParams::zeros(d);
  visit_tensors(p, [&](const std::string& name, auto& t) {
    auto s = next();
    std::string got;
    Eigen::Index rows = -1, cols = -1;
    if (!(s >> tag >> got >> rows >> cols) || tag != "tensor") bad("expected tensor " + name);
    if (got != name) bad("expected tensor " + name + ", found " + got);
    if (rows != t.rows() || cols != t.cols()) bad("tensor " + name + " has wrong shape");
    for (Eigen::Index i = 0; i < rows; ++i) {
      auto r = next();
      std::string tok;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(r >> tok)) bad("row too short in " + name);
        t(i, j) = detail::parse_hex_double(tok, line_no);
      }
      if (r >> tok) bad("row too long in " + name);
    }
  });
  {
    auto s = next();
    if (!(s >> tag) || tag != "end") bad("expected end");
  }
  p.check();
  return p;
}

inline void save_checkpoint(const std::string& file, const NeuralSdeParams& p) {
  std::ofstream os(file, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write checkpoint " + file);
  write_checkpoint(os, p);
  require(static_cast<bool>(os), ErrorKind::io, "write failed for " + file);
}

inline NeuralSdeParams load_checkpoint(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open checkpoint " + file);
  return read_checkpoint(is);
}

}  // namespace sigsde
