#pragma once

#include <cstddef>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/nsde/mlp.hpp"
#include "sigsde/nsde/neural_sde.hpp"
#include "sigsde/parallel.hpp"

namespace sigsde {

/// Parameter gradients, shape-congruent with NeuralSdeParams.
using GradientBundle = NeuralSdeParams;

inline void accumulate(GradientBundle& into, const GradientBundle& g) {
  auto src = flatten(g);
  std::size_t k = 0;
  visit_tensors(into, [&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += src[k++];
  });
}

namespace detail {

/// Reverse pass for one sample. `gx` is L x (1 + d_x) (time column ignored).
inline void backward_sample(const NeuralSdeParams& p, const Rollout& rec, std::size_t i, const Matrix& gx,
                            GradientBundle& G) {
  const SdeDims& d = p.dims;
  const Matrix& Y = rec.states[i];
  const Vector& c = rec.condition;
  const Eigen::Index L = Y.rows();
  const auto dy = static_cast<Eigen::Index>(d.d_y);
  const auto dw = static_cast<Eigen::Index>(d.d_w);
  const Eigen::Index off_y = d.time_input ? 1 : 0;

  Matrix gY = Matrix::Zero(L, dy);
  for (Eigen::Index k = 0; k < L; ++k) {
    const Vector g = gx.row(k).tail(gx.cols() - 1).transpose();
    G.A.noalias() += g * readout_input(Y.row(k), c).transpose();
    G.b += g;
    gY.row(k).noalias() += (p.A.leftCols(dy).transpose() * g).transpose();
  }

  MlpTape tape;
  for (Eigen::Index k = L - 1; k-- > 0;) {
    const double t = rec.grid[static_cast<std::size_t>(k)];
    const double dt = rec.grid[static_cast<std::size_t>(k) + 1] - t;
    const Vector g = gY.row(k + 1).transpose();
    gY.row(k) += gY.row(k + 1);
    const Vector in = field_input(d, t, Y.row(k), c);

    forward(p.mu, in, &tape);
    Vector gin = backward(p.mu, tape, dt * g, G.mu);
    gY.row(k) += gin.segment(off_y, dy).transpose();

    forward(p.sigma, in, &tape);
    Vector gs(dy * dw);
    const auto dW = rec.noise.dW[i].row(k);
    for (Eigen::Index r = 0; r < dy; ++r)
      for (Eigen::Index q = 0; q < dw; ++q) gs(r * dw + q) = g(r) * dW(q);
    gin = backward(p.sigma, tape, gs, G.sigma);
    gY.row(k) += gin.segment(off_y, dy).transpose();
  }

  forward(p.xi, initial_input(d, rec.noise.a, i, c), &tape);
  backward(p.xi, tape, gY.row(0).transpose(), G.xi);
}

}  // namespace detail

/// Exact reverse-mode derivative of the discrete rollout: readout, Euler steps
/// in reverse, vector fields, then the initial map. The conditioning vector is
/// a constant input. Samples run concurrently; the sum is taken in sample order.
inline GradientBundle backward(const NeuralSdeParams& params, const Rollout& rec,
                               const std::vector<Matrix>& grad_values) {
  const std::size_t n = rec.states.size();
  require(grad_values.size() == n, ErrorKind::invalid_state, "backward: one gradient per sample expected");
  for (std::size_t i = 0; i < n; ++i)
    require(grad_values[i].rows() == rec.states[i].rows() &&
                static_cast<std::size_t>(grad_values[i].cols()) == params.dims.d_x + 1,
            ErrorKind::invalid_state, "backward: gradient shape does not match the rollout");
  std::vector<GradientBundle> per(n);
  parallel_for(n, [&](std::size_t i) {
    per[i] = zeros_like(params);
    detail::backward_sample(params, rec, i, grad_values[i], per[i]);
  });
  GradientBundle total = zeros_like(params);
  for (const auto& g : per) accumulate(total, g);
  return total;
}

}  // namespace sigsde
