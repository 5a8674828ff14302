#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/paths/path.hpp"

namespace sigsde {

enum class FinalActivation { tanh, identity };

inline std::string to_string(FinalActivation a) { return a == FinalActivation::tanh ? "tanh" : "identity"; }

inline FinalActivation final_activation_from_string(const std::string& s) {
  if (s == "tanh") return FinalActivation::tanh;
  if (s == "identity") return FinalActivation::identity;
  fail(ErrorKind::parse, "unknown final activation '" + s + "'");
}

/// x * sigmoid(x) / 1.1
inline double lipswish(double x) { return x / (1.0 + std::exp(-x)) / 1.1; }

inline double lipswish_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return (s + x * s * (1.0 - s)) / 1.1;
}

/// Feed-forward net: LipSwish on hidden layers, `final_activation` on the last.
/// W[l] has shape out x in.
struct Mlp {
  std::vector<Matrix> W;
  std::vector<Vector> b;
  FinalActivation final_activation = FinalActivation::tanh;

  static Mlp zeros(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, FinalActivation fa) {
    Mlp m;
    m.final_activation = fa;
    std::size_t prev = in;
    for (std::size_t h : hidden) {
      m.W.push_back(Matrix::Zero(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(prev)));
      m.b.push_back(Vector::Zero(static_cast<Eigen::Index>(h)));
      prev = h;
    }
    m.W.push_back(Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(prev)));
    m.b.push_back(Vector::Zero(static_cast<Eigen::Index>(out)));
    return m;
  }

  std::size_t layers() const noexcept { return W.size(); }
  std::size_t in_dim() const { return static_cast<std::size_t>(W.front().cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(W.back().rows()); }

  void check() const {
    require(!W.empty() && W.size() == b.size(), ErrorKind::invalid_state, "mlp: layer count mismatch");
    for (std::size_t l = 0; l < W.size(); ++l) {
      require(W[l].rows() == b[l].size(), ErrorKind::invalid_state, "mlp: bias shape mismatch");
      if (l > 0) require(W[l].cols() == W[l - 1].rows(), ErrorKind::invalid_state, "mlp: shapes do not chain");
      require(W[l].allFinite() && b[l].allFinite(), ErrorKind::numeric, "mlp: non-finite parameter");
    }
  }
};

/// Layer inputs and pre-activations saved by a forward pass.
struct MlpTape {
  std::vector<Vector> input;
  std::vector<Vector> pre;
};

inline Vector forward(const Mlp& net, const Vector& x, MlpTape* tape = nullptr) {
  if (tape) {
    tape->input.resize(net.layers());
    tape->pre.resize(net.layers());
  }
  Vector h = x;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Vector z = net.W[l] * h + net.b[l];
    if (tape) {
      tape->input[l] = h;
      tape->pre[l] = z;
    }
    const bool last = l + 1 == net.layers();
    if (!last)
      h = z.unaryExpr([](double v) { return lipswish(v); });
    else if (net.final_activation == FinalActivation::tanh)
      h = z.array().tanh().matrix();
    else
      h = std::move(z);
  }
  return h;
}

/// Vector-Jacobian product. Parameter gradients are added into `grad` (same
/// shapes as `net`); returns the gradient with respect to the input.
inline Vector backward(const Mlp& net, const MlpTape& tape, const Vector& gout, Mlp& grad) {
  Vector g = gout;
  for (std::size_t l = net.layers(); l-- > 0;) {
    const Vector& z = tape.pre[l];
    if (l + 1 == net.layers()) {
      if (net.final_activation == FinalActivation::tanh) g.array() *= 1.0 - z.array().tanh().square();
    } else {
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) *= lipswish_grad(z(i));
    }
    grad.W[l].noalias() += g * tape.input[l].transpose();
    grad.b[l] += g;
    g = net.W[l].transpose() * g;
  }
  return g;
}

}  // namespace sigsde
