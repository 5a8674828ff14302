#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sigsde/error.hpp"
#include "sigsde/nsde/neural_sde.hpp"

namespace sigsde {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    require(lr >= 0 && std::isfinite(lr), ErrorKind::validation, "adam lr must be >= 0");
    require(beta1 >= 0 && beta1 < 1, ErrorKind::validation, "adam beta1 must lie in [0, 1)");
    require(beta2 >= 0 && beta2 < 1, ErrorKind::validation, "adam beta2 must lie in [0, 1)");
    require(eps > 0, ErrorKind::validation, "adam eps must be > 0");
  }
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m, v;
  std::uint64_t step = 0;
};

/// One Adam update with bias correction. A non-finite gradient leaves params
/// and state untouched and returns false.
[[nodiscard]] inline bool adam_step(NeuralSdeParams& params, const NeuralSdeParams& grads, AdamState& st) {
  std::vector<double> g = flatten(grads);
  std::vector<double> x = flatten(params);
  require(g.size() == x.size(), ErrorKind::invalid_state, "adam: gradient is not congruent with params");
  for (double v : g)
    if (!std::isfinite(v)) return false;
  if (st.m.empty()) {
    st.m.assign(x.size(), 0.0);
    st.v.assign(x.size(), 0.0);
  }
  require(st.m.size() == x.size() && st.v.size() == x.size(), ErrorKind::invalid_state,
          "adam: moment shapes do not match params");
  const AdamConfig& c = st.config;
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < x.size(); ++i) {
    st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * g[i];
    st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    x[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
  unflatten(params, x);
  return true;
}

}  // namespace sigsde
