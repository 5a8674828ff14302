#pragma once

#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/csv.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/paths/transforms.hpp"

namespace sigsde {

/// A value-affine transform that can be pushed back through by its adjoint.
struct PathTransform {
  enum class Kind { translate_to_zero, time_normalize, scale };
  Kind kind = Kind::translate_to_zero;
  double c = 1.0;

  /// "translate_to_zero", "time_normalize" or "scale:<c>".
  static PathTransform parse(const std::string& s) {
    if (s == "translate_to_zero") return {Kind::translate_to_zero, 1.0};
    if (s == "time_normalize") return {Kind::time_normalize, 1.0};
    if (s.rfind("scale:", 0) == 0) {
      const double c = parse_double(s.substr(6), "transform '" + s + "'");
      require(c > 0, ErrorKind::validation, "scale transform needs c > 0");
      return {Kind::scale, c};
    }
    fail(ErrorKind::validation, "unknown path transform '" + s + "'");
  }

  std::string str() const {
    switch (kind) {
      case Kind::translate_to_zero: return "translate_to_zero";
      case Kind::time_normalize: return "time_normalize";
      case Kind::scale: return "scale:" + format_double(c);
    }
    return "?";
  }
};

using TransformChain = std::vector<PathTransform>;

inline Path apply_chain(const TransformChain& chain, Path p) {
  for (const auto& t : chain) {
    switch (t.kind) {
      case PathTransform::Kind::translate_to_zero: p = translate_to_zero(p); break;
      case PathTransform::Kind::time_normalize: p = time_normalize(p); break;
      case PathTransform::Kind::scale: p = scale(p, t.c); break;
    }
  }
  return p;
}

inline PathBatch apply_chain(const TransformChain& chain, const PathBatch& batch) {
  return map_batch(batch, [&](const Path& p) { return apply_chain(chain, p); });
}

/// Pulls a gradient on the transformed values back to the raw values. The
/// time channel never receives gradient.
inline Matrix pullback(const TransformChain& chain, const Path& raw, Matrix g) {
  const auto c0 = static_cast<Eigen::Index>(raw.first_value_channel());
  const auto nc = g.cols() - c0;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    switch (it->kind) {
      case PathTransform::Kind::translate_to_zero: {
        const Eigen::RowVectorXd total = g.rightCols(nc).colwise().sum();
        g.row(0).tail(nc) -= total;
        break;
      }
      case PathTransform::Kind::time_normalize: break;
      case PathTransform::Kind::scale: g.rightCols(nc) *= it->c; break;
    }
  }
  if (raw.time_augmented()) g.col(0).setZero();
  return g;
}

}  // namespace sigsde
