#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sigsde/diffengine/adam.hpp"
#include "sigsde/diffengine/backward.hpp"
#include "sigsde/error.hpp"
#include "sigsde/nsde/neural_sde.hpp"
#include "sigsde/paths/chain.hpp"
#include "sigsde/rng.hpp"
#include "sigsde/scores/scores.hpp"

namespace sigsde {

struct TrainConfig {
  std::size_t steps = 100;
  std::size_t batch = 64;
  AdamConfig adam;
  KernelSpec kernel;
  TimeGrid generator_grid = TimeGrid::stepped(0.0, 1.0, 64);
  TransformChain transforms{{PathTransform::Kind::translate_to_zero, 1.0}, {PathTransform::Kind::time_normalize, 1.0}};
  std::uint64_t seed = 0;
  /// Also report MMD^2 = loss + real-real term (unconditional runs only).
  bool log_mmd = false;
  /// Conditional training only: samples per conditioning path, log-signature
  /// depth and the transforms applied before encoding.
  std::size_t fan_out = 32;
  std::size_t condition_depth = 5;
  std::vector<ConditionTransform> condition_transforms{ConditionTransform::time_normalize,
                                                       ConditionTransform::lead_lag};

  void validate() const {
    require(batch >= 2 || fan_out >= 2, ErrorKind::validation, "batch must be >= 2");
    require(generator_grid.size() >= 2, ErrorKind::validation, "generator grid needs >= 2 nodes");
    adam.validate();
    kernel.solver.validate();
    require(!kernel.terms.empty(), ErrorKind::validation, "kernel needs >= 1 term");
    for (const auto& t : kernel.terms) {
      require(t.scale > 0, ErrorKind::validation, "kernel scale must be > 0");
      (void)StaticKernel::checked(t.kernel);
    }
  }
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0;
  double grad_norm = 0;
  double mmd2 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  NeuralSdeParams params;
  std::vector<StepRecord> log;
  bool aborted = false;
  std::string reason;
};

/// Called after every applied update with the new parameters.
using TrainCallback = std::function<void(const StepRecord&, const NeuralSdeParams&)>;

struct StepOutput {
  double loss = 0;
  std::optional<GradientBundle> grad;
  double real_term = std::numeric_limits<double>::quiet_NaN();
};

/// Loss of one unconditional step (sample, transform, score against the real
/// batch) and, optionally, its exact parameter gradient.
inline StepOutput unconditional_step(const NeuralSdeParams& params, const PathBatch& real_batch,
                                     const NoiseBundle& noise, const TimeGrid& grid, const TransformChain& chain,
                                     const KernelSpec& kernel, bool want_grad) {
  Rollout rec;
  const PathBatch raw = sample(params, noise.size(), grid, noise, std::nullopt, want_grad ? &rec : nullptr);
  const PathBatch gen = apply_chain(chain, raw);
  ScoreValue s = loss_unconditional(gen, real_batch, kernel, want_grad);
  StepOutput out{s.value, std::nullopt};
  if (want_grad) {
    auto& gv = *s.gradient_wrt_generated;
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = pullback(chain, raw[i], std::move(gv[i]));
    out.grad = backward(params, rec, gv);
  }
  return out;
}

/// Conditional step: fan_out samples per pair, each pair with its own noise
/// stream, scored against the pair's observed continuation.
inline StepOutput conditional_step(const NeuralSdeParams& params, const std::vector<ConditionalPair>& pairs,
                                   const std::vector<Vector>& encodings, std::uint64_t noise_seed,
                                   const TimeGrid& grid, const TransformChain& chain, const KernelSpec& kernel,
                                   std::size_t fan_out, bool want_grad) {
  require(encodings.size() == pairs.size(), ErrorKind::invalid_state, "one encoding per pair expected");
  std::vector<Rollout> recs(pairs.size());
  std::vector<PathBatch> raws;
  raws.reserve(pairs.size());
  ConditionalSampler sampler = [&](const Path&, std::size_t i, std::size_t m) {
    const NoiseBundle nb = draw_noise(params.dims, m, grid, derive_seed(noise_seed, static_cast<std::uint64_t>(i)));
    raws.push_back(sample(params, m, grid, nb, encodings[i], want_grad ? &recs[i] : nullptr));
    return apply_chain(chain, raws.back());
  };
  ScoreValue s = loss_conditional(pairs, sampler, fan_out, kernel, want_grad);
  StepOutput out{s.value, std::nullopt};
  if (want_grad) {
    auto& gv = *s.gradient_wrt_generated;
    GradientBundle total = zeros_like(params);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::vector<Matrix> gi(fan_out);
      for (std::size_t j = 0; j < fan_out; ++j)
        gi[j] = pullback(chain, raws[i][j], std::move(gv[i * fan_out + j]));
      accumulate(total, backward(params, recs[i], gi));
    }
    out.grad = std::move(total);
  }
  return out;
}

inline double l2_norm(const GradientBundle& g) {
  double s = 0;
  for (double v : flatten(g)) s += v * v;
  return std::sqrt(s);
}

namespace detail {

/// Epoch-wise seeded shuffle; a batch never straddles two epochs.
class BatchDrawer {
 public:
  BatchDrawer(std::size_t n, std::size_t batch, std::uint64_t seed) : perm_(n), batch_(batch), rng_(make_rng(seed)) {
    require(n >= batch, ErrorKind::validation,
            "dataset has " + std::to_string(n) + " items, fewer than batch " + std::to_string(batch));
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    std::shuffle(perm_.begin(), perm_.end(), rng_);
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > perm_.size()) {
      std::shuffle(perm_.begin(), perm_.end(), rng_);
      cursor_ = 0;
    }
    std::vector<std::size_t> idx(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return idx;
  }

 private:
  std::vector<std::size_t> perm_;
  std::size_t batch_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

template <class Step>
TrainResult run_training(NeuralSdeParams params, const TrainConfig& cfg, Step&& step, const TrainCallback& on_step) {
  AdamState adam{cfg.adam, {}, {}, 0};
  TrainResult res;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    StepOutput out;
    try {
      out = step(params, s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::divergence) throw;
      res.aborted = true;
      res.reason = "step " + std::to_string(s) + ": " + e.what();
      break;
    }
    if (!std::isfinite(out.loss)) {
      res.aborted = true;
      res.reason = "step " + std::to_string(s) + ": non-finite loss";
      break;
    }
    const StepRecord rec{s, out.loss, l2_norm(*out.grad), out.loss + out.real_term};
    if (!adam_step(params, *out.grad, adam)) {
      res.aborted = true;
      res.reason = "step " + std::to_string(s) + ": non-finite gradient, update refused";
      break;
    }
    res.log.push_back(rec);
    if (on_step) on_step(rec, params);
  }
  res.params = std::move(params);
  return res;
}

}  // namespace detail

/// Unconditional training against `real` (already transformed). On divergence
/// the run stops and returns the last good parameters with `aborted` set.
inline TrainResult train(NeuralSdeParams params, const PathBatch& real, const TrainConfig& cfg,
                         const TrainCallback& on_step = {}) {
  cfg.validate();
  params.check();
  require(params.dims.d_c == 0, ErrorKind::validation, "unconditional training needs d_c = 0");
  require(real.channels() == params.dims.d_x + 1, ErrorKind::validation,
          "real paths must be time-augmented with d_x value channels");
  detail::BatchDrawer drawer(real.size(), cfg.batch, derive_seed(cfg.seed, "data"));
  const std::uint64_t noise_stream = derive_seed(cfg.seed, "noise");
  return detail::run_training(
      std::move(params), cfg,
      [&](const NeuralSdeParams& p, std::size_t s) {
        const PathBatch rb = real.select(drawer.next());
        const NoiseBundle nb = draw_noise(p.dims, cfg.batch, cfg.generator_grid, derive_seed(noise_stream, s));
        StepOutput out = unconditional_step(p, rb, nb, cfg.generator_grid, cfg.transforms, cfg.kernel, true);
        if (cfg.log_mmd) out.real_term = real_real_term(rb, cfg.kernel);
        return out;
      },
      on_step);
}

/// Conditional training on (x, y) pairs; `batch` pairs per step.
inline TrainResult train_conditional(NeuralSdeParams params, const std::vector<ConditionalPair>& pairs,
                                     const TrainConfig& cfg, const TrainCallback& on_step = {}) {
  cfg.validate();
  params.check();
  require(cfg.fan_out >= 2, ErrorKind::validation, "fan_out must be >= 2");
  require(!pairs.empty(), ErrorKind::validation, "no conditional pairs");
  require(pairs[0].y.length() == cfg.generator_grid.size(), ErrorKind::validation,
          "generator grid length must equal the continuation length");
  std::vector<Vector> enc;
  enc.reserve(pairs.size());
  for (const auto& pr : pairs) enc.push_back(encode_condition(pr.x, cfg.condition_depth, cfg.condition_transforms));
  require(static_cast<std::size_t>(enc[0].size()) == params.dims.d_c, ErrorKind::validation,
          "d_c = " + std::to_string(params.dims.d_c) + " but encodings have length " + std::to_string(enc[0].size()));
  detail::BatchDrawer drawer(pairs.size(), cfg.batch, derive_seed(cfg.seed, "data"));
  const std::uint64_t noise_stream = derive_seed(cfg.seed, "noise");
  return detail::run_training(
      std::move(params), cfg,
      [&](const NeuralSdeParams& p, std::size_t s) {
        std::vector<ConditionalPair> bp;
        std::vector<Vector> be;
        for (std::size_t i : drawer.next()) {
          bp.push_back(pairs[i]);
          be.push_back(enc[i]);
        }
        return conditional_step(p, bp, be, derive_seed(noise_stream, s), cfg.generator_grid, cfg.transforms,
                                cfg.kernel, cfg.fan_out, true);
      },
      on_step);
}

}  // namespace sigsde
