#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/nsde/mlp.hpp"
#include "sigsde/parallel.hpp"
#include "sigsde/paths/path.hpp"
#include "sigsde/paths/transforms.hpp"
#include "sigsde/rng.hpp"
#include "sigsde/tsig/signature.hpp"

namespace sigsde {

/// Generator dimensions. Vector fields read [t, Y, C] (t only when
/// time_input), the initial map reads [a, C] (a only when learn_initial) and
/// the readout reads [Y, C]. d_c = 0 means unconditional.
struct SdeDims {
  std::size_t d_a = 1;
  std::size_t d_y = 8;
  std::size_t d_w = 3;
  std::size_t d_x = 1;
  std::size_t d_c = 0;
  std::vector<std::size_t> hidden{16};
  bool learn_initial = true;
  bool time_input = true;
  FinalActivation drift_final = FinalActivation::tanh;
  FinalActivation diffusion_final = FinalActivation::tanh;

  std::size_t field_input() const { return (time_input ? 1 : 0) + d_y + d_c; }
  std::size_t initial_input() const { return (learn_initial ? d_a : 0) + d_c; }
  std::size_t readout_input() const { return d_y + d_c; }

  void validate() const {
    require(d_y >= 1, ErrorKind::validation, "d_y must be >= 1");
    require(d_w >= 1, ErrorKind::validation, "d_w must be >= 1");
    require(d_x >= 1, ErrorKind::validation, "d_x must be >= 1");
    require(!learn_initial || d_a >= 1, ErrorKind::validation, "d_a must be >= 1 when learn_initial");
    for (std::size_t h : hidden) require(h >= 1, ErrorKind::validation, "hidden layer widths must be >= 1");
  }

  bool operator==(const SdeDims&) const = default;
};

struct NeuralSdeParams {
  SdeDims dims;
  Mlp xi, mu, sigma;
  Matrix A;
  Vector b;

  /// Zero parameters with the shapes implied by `dims`. Without a learned
  /// initial distribution the initial map is affine in C (a learned constant
  /// when unconditional).
  static NeuralSdeParams zeros(const SdeDims& d) {
    d.validate();
    NeuralSdeParams p;
    p.dims = d;
    p.xi = d.learn_initial ? Mlp::zeros(d.initial_input(), d.hidden, d.d_y, FinalActivation::identity)
                           : Mlp::zeros(d.initial_input(), {}, d.d_y, FinalActivation::identity);
    p.mu = Mlp::zeros(d.field_input(), d.hidden, d.d_y, d.drift_final);
    p.sigma = Mlp::zeros(d.field_input(), d.hidden, d.d_y * d.d_w, d.diffusion_final);
    p.A = Matrix::Zero(static_cast<Eigen::Index>(d.d_x), static_cast<Eigen::Index>(d.readout_input()));
    p.b = Vector::Zero(static_cast<Eigen::Index>(d.d_x));
    return p;
  }

  void check() const {
    dims.validate();
    xi.check();
    mu.check();
    sigma.check();
    require(xi.in_dim() == dims.initial_input() && xi.out_dim() == dims.d_y, ErrorKind::invalid_state,
            "initial map has wrong shape");
    require(mu.in_dim() == dims.field_input() && mu.out_dim() == dims.d_y, ErrorKind::invalid_state,
            "drift has wrong shape");
    require(sigma.in_dim() == dims.field_input() && sigma.out_dim() == dims.d_y * dims.d_w,
            ErrorKind::invalid_state, "diffusion has wrong shape");
    require(static_cast<std::size_t>(A.rows()) == dims.d_x &&
                static_cast<std::size_t>(A.cols()) == dims.readout_input() &&
                static_cast<std::size_t>(b.size()) == dims.d_x,
            ErrorKind::invalid_state, "readout has wrong shape");
    require(A.allFinite() && b.allFinite(), ErrorKind::numeric, "readout has non-finite entries");
  }
};

/// Calls f(name, tensor) for every parameter tensor in a fixed order. Works
/// for const and non-const parameter sets; tensor is a Matrix or a Vector.
template <class P, class F>
void visit_tensors(P& p, F&& f) {
  auto net = [&](auto& m, const char* name) {
    for (std::size_t l = 0; l < m.W.size(); ++l) {
      f(std::string(name) + ".W" + std::to_string(l), m.W[l]);
      f(std::string(name) + ".b" + std::to_string(l), m.b[l]);
    }
  };
  net(p.xi, "xi");
  net(p.mu, "mu");
  net(p.sigma, "sigma");
  f(std::string("A"), p.A);
  f(std::string("b"), p.b);
}

inline std::size_t parameter_count(const NeuralSdeParams& p) {
  std::size_t n = 0;
  visit_tensors(p, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

inline std::vector<double> flatten(const NeuralSdeParams& p) {
  std::vector<double> out;
  out.reserve(parameter_count(p));
  visit_tensors(p, [&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data()[i]);
  });
  return out;
}

inline void unflatten(NeuralSdeParams& p, const std::vector<double>& v) {
  require(v.size() == parameter_count(p), ErrorKind::invalid_argument, "flat parameter vector has wrong size");
  std::size_t k = 0;
  visit_tensors(p, [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = v[k++];
  });
}

inline NeuralSdeParams zeros_like(const NeuralSdeParams& p) { return NeuralSdeParams::zeros(p.dims); }

/// Weights (and A) uniform in [-s, s] with s = init_scale / sqrt(fan_in);
/// biases (and b) zero.
inline NeuralSdeParams init_params(const SdeDims& dims, double init_scale, std::uint64_t seed) {
  require(init_scale >= 0 && std::isfinite(init_scale), ErrorKind::validation, "init_scale must be >= 0");
  NeuralSdeParams p = NeuralSdeParams::zeros(dims);
  Rng rng = make_rng(derive_seed(seed, "init"));
  auto fill = [&](Matrix& W) {
    if (W.cols() == 0) return;
    const double s = init_scale / std::sqrt(static_cast<double>(W.cols()));
    std::uniform_real_distribution<double> u(-s, s);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = init_scale == 0 ? 0.0 : u(rng);
  };
  for (auto* net : {&p.xi, &p.mu, &p.sigma})
    for (auto& W : net->W) fill(W);
  fill(p.A);
  return p;
}

/// Initial draws a (n x d_a) and Brownian increments (per sample, steps x d_w,
/// already scaled by sqrt(dt)). Sample i uses its own derived stream, so any
/// prefix of a bundle is reproducible on its own.
struct NoiseBundle {
  Matrix a;
  std::vector<Matrix> dW;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return dW.size(); }
};

inline NoiseBundle draw_noise(const SdeDims& dims, std::size_t n, const TimeGrid& grid, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "noise: n must be >= 1");
  require(grid.size() >= 2, ErrorKind::invalid_argument, "noise: grid needs >= 2 nodes");
  NoiseBundle nb;
  nb.seed = seed;
  const auto steps = static_cast<Eigen::Index>(grid.size() - 1);
  const auto dw = static_cast<Eigen::Index>(dims.d_w);
  nb.a.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims.d_a));
  nb.dW.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> z;
    for (Eigen::Index c = 0; c < nb.a.cols(); ++c) nb.a(static_cast<Eigen::Index>(i), c) = z(rng);
    Matrix& w = nb.dW[i];
    w.resize(steps, dw);
    for (Eigen::Index k = 0; k < steps; ++k) {
      const double sq = std::sqrt(grid[static_cast<std::size_t>(k) + 1] - grid[static_cast<std::size_t>(k)]);
      for (Eigen::Index c = 0; c < dw; ++c) w(k, c) = sq * z(rng);
    }
  }
  return nb;
}

/// Everything the reverse pass needs: the grid, every hidden state, the noise
/// and the conditioning vector.
struct Rollout {
  TimeGrid grid;
  std::vector<Matrix> states;  // per sample, L x d_y
  NoiseBundle noise;
  Vector condition;  // empty when unconditional
};

namespace detail {

inline Vector field_input(const SdeDims& d, double t, const Eigen::Ref<const Eigen::RowVectorXd>& y, const Vector& c) {
  Vector in(static_cast<Eigen::Index>(d.field_input()));
  Eigen::Index o = 0;
  if (d.time_input) in(o++) = t;
  in.segment(o, y.size()) = y.transpose();
  o += y.size();
  if (c.size() > 0) in.segment(o, c.size()) = c;
  return in;
}

inline Vector initial_input(const SdeDims& d, const Matrix& a, std::size_t i, const Vector& c) {
  Vector in(static_cast<Eigen::Index>(d.initial_input()));
  Eigen::Index o = 0;
  if (d.learn_initial) {
    in.head(a.cols()) = a.row(static_cast<Eigen::Index>(i)).transpose();
    o = a.cols();
  }
  if (c.size() > 0) in.segment(o, c.size()) = c;
  return in;
}

inline Vector readout_input(const Eigen::Ref<const Eigen::RowVectorXd>& y, const Vector& c) {
  Vector z(y.size() + c.size());
  z.head(y.size()) = y.transpose();
  if (c.size() > 0) z.tail(c.size()) = c;
  return z;
}

}  // namespace detail

/// Euler-Maruyama rollout of n samples on `grid`, read out through X = A[Y, C] + b
/// and returned time-augmented (channel 0 is t).
inline PathBatch sample(const NeuralSdeParams& params, std::size_t n, const TimeGrid& grid, const NoiseBundle& noise,
                        const std::optional<Vector>& condition = std::nullopt, Rollout* record = nullptr) {
  const SdeDims& d = params.dims;
  require(noise.size() == n && static_cast<std::size_t>(noise.a.rows()) == n, ErrorKind::invalid_argument,
          "noise bundle does not match sample count");
  require(static_cast<std::size_t>(noise.a.cols()) == d.d_a, ErrorKind::invalid_argument, "noise has wrong d_a");
  const Vector cond = condition ? *condition : Vector();
  require(static_cast<std::size_t>(cond.size()) == d.d_c, ErrorKind::invalid_argument,
          "condition length " + std::to_string(cond.size()) + " does not match d_c " + std::to_string(d.d_c));
  const auto L = static_cast<Eigen::Index>(grid.size());
  for (const auto& w : noise.dW)
    require(w.rows() == L - 1 && static_cast<std::size_t>(w.cols()) == d.d_w, ErrorKind::invalid_argument,
            "noise increments do not match the grid");

  std::vector<Matrix> states(n);
  std::vector<Path> out(n);
  parallel_for(n, [&](std::size_t i) {
    Matrix Y(L, static_cast<Eigen::Index>(d.d_y));
    Y.row(0) = forward(params.xi, detail::initial_input(d, noise.a, i, cond)).transpose();
    const Matrix& dW = noise.dW[i];
    for (Eigen::Index k = 0; k + 1 < L; ++k) {
      const double t = grid[static_cast<std::size_t>(k)];
      const double dt = grid[static_cast<std::size_t>(k) + 1] - t;
      const Vector in = detail::field_input(d, t, Y.row(k), cond);
      const Vector drift = forward(params.mu, in);
      const Vector s = forward(params.sigma, in);
      const Eigen::Map<const Matrix> S(s.data(), static_cast<Eigen::Index>(d.d_y), static_cast<Eigen::Index>(d.d_w));
      Y.row(k + 1) = Y.row(k) + dt * drift.transpose() + (S * dW.row(k).transpose()).transpose();
      if (!Y.row(k + 1).allFinite())
        fail(ErrorKind::divergence, "rollout diverged at step " + std::to_string(k + 1) + " (sample " +
                                        std::to_string(i) + ")");
    }
    Matrix X(L, static_cast<Eigen::Index>(d.d_x) + 1);
    for (Eigen::Index k = 0; k < L; ++k) {
      X(k, 0) = grid[static_cast<std::size_t>(k)];
      X.row(k).tail(X.cols() - 1) = (params.A * detail::readout_input(Y.row(k), cond) + params.b).transpose();
    }
    require(X.allFinite(), ErrorKind::divergence, "readout produced non-finite values (sample " + std::to_string(i) + ")");
    out[i] = Path(grid, std::move(X), true);
    states[i] = std::move(Y);
  });
  if (record) {
    record->grid = grid;
    record->states = std::move(states);
    record->noise = noise;
    record->condition = cond;
  }
  return PathBatch(std::move(out));
}

enum class ConditionTransform { time_normalize, lead_lag, translate_to_zero };

inline ConditionTransform condition_transform_from_string(const std::string& s) {
  if (s == "time_normalize") return ConditionTransform::time_normalize;
  if (s == "lead_lag") return ConditionTransform::lead_lag;
  if (s == "translate_to_zero") return ConditionTransform::translate_to_zero;
  fail(ErrorKind::parse, "unknown condition transform '" + s + "'");
}

inline std::string to_string(ConditionTransform t) {
  switch (t) {
    case ConditionTransform::time_normalize: return "time_normalize";
    case ConditionTransform::lead_lag: return "lead_lag";
    case ConditionTransform::translate_to_zero: return "translate_to_zero";
  }
  return "?";
}

/// Log-signature encoding of a conditioning path after the given transforms,
/// levels 1..depth flattened (level 0 of a log-signature is always zero).
inline Vector encode_condition(const Path& x, std::size_t depth, const std::vector<ConditionTransform>& transforms) {
  Path p = x;
  for (auto t : transforms) {
    switch (t) {
      case ConditionTransform::time_normalize: p = time_normalize(p); break;
      case ConditionTransform::lead_lag: p = lead_lag(p); break;
      case ConditionTransform::translate_to_zero: p = translate_to_zero(p); break;
    }
  }
  const auto flat = log_signature(p, depth).flatten();
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

/// Channel count after the transforms, so d_c can be sized up front.
inline std::size_t encoded_condition_length(std::size_t channels, std::size_t depth,
                                            const std::vector<ConditionTransform>& transforms) {
  for (auto t : transforms)
    if (t == ConditionTransform::lead_lag) channels *= 2;
  return log_signature_length(channels, depth);
}

}  // namespace sigsde
