#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigsde/cli/config.hpp"
#include "sigsde/diffengine/gradcheck.hpp"
#include "sigsde/evalstats/report.hpp"
#include "sigsde/nsde/checkpoint.hpp"
#include "sigsde/sigkernel/gram.hpp"

namespace sigsde {

/// Process exit codes of the CLI.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2, exit_io = 3 };

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation:
    case ErrorKind::invalid_argument:
    case ErrorKind::out_of_range:
    case ErrorKind::parse: return exit_validation;
    case ErrorKind::io: return exit_io;
    default: return exit_runtime;
  }
}

/// Raw simulated or loaded paths, time-augmented, before any transform.
struct RawData {
  PathBatch train, test;
};

/// Data as the model sees it.
struct RunData {
  PathBatch train, test;
  std::vector<ConditionalPair> train_pairs, test_pairs;
  std::optional<StandardizationStats> stats;

  bool conditional() const { return !train_pairs.empty(); }
};

inline RawData load_raw_data(const RunConfig& c) {
  const DatasetSpec& d = c.dataset;
  const TimeGrid grid = TimeGrid::stepped(0.0, d.dt, d.length);
  const std::uint64_t train_seed = derive_seed(c.seed, "train-data"), test_seed = derive_seed(c.seed, "test-data");
  switch (d.source) {
    case DatasetSpec::Source::gbm: {
      GbmConfig g{d.mu, d.sigma, d.y0, grid, d.n, train_seed};
      PathBatch train = gbm(g);
      g.n = d.n_test;
      g.seed = test_seed;
      return {std::move(train), gbm(g)};
    }
    case DatasetSpec::Source::rbergomi: {
      RBergomiConfig r{d.xi0, d.eta, d.rho, d.hurst, grid, d.n, train_seed, d.include_variance};
      PathBatch train = rbergomi(r);
      r.n = d.n_test;
      r.seed = test_seed;
      return {std::move(train), rbergomi(r)};
    }
    case DatasetSpec::Source::file: break;
  }
  std::vector<Path> loaded = load_paths_csv(d.file);
  std::vector<Path> all;
  if (d.window > 0) {
    require(loaded.size() == 1, ErrorKind::validation,
            d.file + ": windowing needs exactly one series, found " + std::to_string(loaded.size()));
    all = stride_split(time_augment(loaded.front()), d.window, d.stride).paths();
  } else {
    for (const auto& p : loaded) all.push_back(time_augment(p));
  }
  if (d.median_filter) all = median_terminal_filter(all).paths();
  // Chronological split: the last test_fraction of windows is held out.
  const auto n_test = static_cast<std::size_t>(std::floor(d.test_fraction * static_cast<double>(all.size())));
  require(all.size() - n_test >= 2, ErrorKind::validation,
          d.file + ": only " + std::to_string(all.size() - n_test) + " training paths");
  if (n_test == 0) return {PathBatch(all), PathBatch(all)};
  std::vector<Path> test(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
  all.resize(all.size() - n_test);
  return {PathBatch(std::move(all)), PathBatch(std::move(test))};
}

inline RunData prepare_data(const RunConfig& c) {
  RawData raw = load_raw_data(c);
  RunData out;
  if (c.conditional.enabled) {
    const auto& cs = c.conditional;
    auto make = [&](const PathBatch& b) {
      auto pairs = make_conditional_pairs(b, cs.past, cs.future, cs.pairs);
      for (auto& pr : pairs) pr.y = apply_chain(c.transforms, pr.y);
      return pairs;
    };
    out.train_pairs = make(raw.train);
    out.test_pairs = make(raw.test);
    return out;
  }
  if (c.dataset.standardize) {
    out.stats = fit_standardization(raw.train);
    raw.train = standardize(raw.train, *out.stats);
    raw.test = standardize(raw.test, *out.stats);
  }
  out.train = apply_chain(c.transforms, raw.train);
  out.test = apply_chain(c.transforms, raw.test);
  return out;
}

/// Generator dimensions with d_x and d_c filled in from the data.
inline SdeDims resolved_dims(const RunConfig& c, const RunData& data) {
  SdeDims d = c.generator.dims;
  if (data.conditional()) {
    const Path& y = data.train_pairs.front().y;
    d.d_x = y.channels() - y.first_value_channel();
    d.d_c = static_cast<std::size_t>(
        encode_condition(data.train_pairs.front().x, c.conditional.depth, c.conditional.transforms).size());
  } else {
    d.d_x = data.train.channels() - data.train[0].first_value_channel();
    d.d_c = 0;
  }
  return d;
}

inline TimeGrid generator_grid(const RunConfig& c, const RunData& data) {
  const std::size_t L = data.conditional() ? data.train_pairs.front().y.length() : data.train.length();
  return c.generator.dt > 0 ? TimeGrid::stepped(0.0, c.generator.dt, L) : TimeGrid::uniform(0.0, 1.0, L);
}

inline TrainConfig train_config(const RunConfig& c, const RunData& data) {
  TrainConfig t;
  t.steps = c.schedule.steps;
  t.batch = c.schedule.batch;
  t.adam = c.optimizer;
  t.kernel = c.kernel;
  t.generator_grid = generator_grid(c, data);
  t.transforms = c.transforms;
  t.seed = derive_seed(c.seed, "train");
  t.log_mmd = c.schedule.log_mmd && !data.conditional();
  t.fan_out = c.conditional.fan_out;
  t.condition_depth = c.conditional.depth;
  t.condition_transforms = c.conditional.transforms;
  return t;
}

inline NeuralSdeParams initial_params(const RunConfig& c, const RunData& data) {
  return init_params(resolved_dims(c, data), c.generator.init_scale, derive_seed(c.seed, "init"));
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write " + p.string());
  return os;
}

inline void make_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  require(!ec, ErrorKind::io, "cannot create directory " + p.string() + ": " + ec.message());
}

inline std::string step_name(std::size_t steps_done) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu.ckpt", steps_done);
  return buf;
}

}  // namespace detail

/// Writes the training (or test) split of the configured dataset, untransformed.
inline void cmd_simulate(const RunConfig& c, const std::string& out, bool test_split = false) {
  RawData raw = load_raw_data(c);
  auto os = detail::open_out(out);
  write_paths_csv(os, test_split ? raw.test : raw.train);
  require(static_cast<bool>(os), ErrorKind::io, "write failed for " + out);
}

struct TrainOutcome {
  std::size_t steps_done = 0;
  bool aborted = false;
  std::string reason;
  NeuralSdeParams params;
};

/// Run directory layout:
///   config.json          resolved config, enough to repeat the run
///   metrics.jsonl        {"step","loss","mmd2","grad_norm"} per step
///   timing.jsonl         {"step","wall_seconds"} per step
///   checkpoints/step_NNNNNN.ckpt  every checkpoint_every steps
///   final.ckpt           last good parameters
inline TrainOutcome cmd_train(const RunConfig& c, const std::string& out_dir, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  detail::make_dir(dir / "checkpoints");
  {
    auto os = detail::open_out(dir / "config.json");
    os << to_json(c).dump(2) << '\n';
  }
  const RunData data = prepare_data(c);
  const TrainConfig tc = train_config(c, data);
  NeuralSdeParams p0 = initial_params(c, data);

  auto metrics = detail::open_out(dir / "metrics.jsonl");
  auto timing = detail::open_out(dir / "timing.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t every = c.schedule.checkpoint_every;
  const std::size_t report_every = std::max<std::size_t>(1, c.schedule.steps / 20);

  auto on_step = [&](const StepRecord& r, const NeuralSdeParams& p) {
    nlohmann::json m = {{"step", r.step}, {"loss", r.loss}, {"mmd2", nullptr}, {"grad_norm", r.grad_norm}};
    if (std::isfinite(r.mmd2)) m["mmd2"] = r.mmd2;
    metrics << m.dump() << '\n';
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing << nlohmann::json{{"step", r.step}, {"wall_seconds", wall}}.dump() << '\n';
    const std::size_t done = r.step + 1;
    if (every > 0 && done % every == 0) save_checkpoint((dir / "checkpoints" / detail::step_name(done)).string(), p);
    if (progress && (r.step % report_every == 0 || done == c.schedule.steps)) {
      *progress << "step " << r.step << " loss " << r.loss;
      if (std::isfinite(r.mmd2)) *progress << " mmd2 " << r.mmd2;
      *progress << " (" << static_cast<long>(wall) << "s)" << std::endl;
    }
  };
  TrainResult res = data.conditional() ? train_conditional(std::move(p0), data.train_pairs, tc, on_step)
                                       : train(std::move(p0), data.train, tc, on_step);
  require(static_cast<bool>(metrics) && static_cast<bool>(timing), ErrorKind::io, "failed writing run logs");
  save_checkpoint((dir / "final.ckpt").string(), res.params);
  return {res.log.size(), res.aborted, res.reason, std::move(res.params)};
}

struct EvalOutcome {
  KsReport ks;
  AcfReport acf_generated, acf_real;
  Matrix cross_corr_generated, cross_corr_real;
  double cross_corr_mse = std::numeric_limits<double>::quiet_NaN();
  std::optional<Histogram> hist_generated, hist_real;
};

/// Generated batch compared against the held-out data. Conditional runs draw
/// one continuation per test pair.
inline PathBatch generate_for_eval(const RunConfig& c, const RunData& data, const NeuralSdeParams& p) {
  const TimeGrid grid = generator_grid(c, data);
  const std::uint64_t noise_seed = derive_seed(c.seed, "eval-noise");
  if (!data.conditional()) {
    const NoiseBundle nb = draw_noise(p.dims, c.eval.n_generated, grid, noise_seed);
    return apply_chain(c.transforms, sample(p, c.eval.n_generated, grid, nb));
  }
  std::vector<Path> out(data.test_pairs.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const Vector enc = encode_condition(data.test_pairs[i].x, c.conditional.depth, c.conditional.transforms);
    const NoiseBundle nb = draw_noise(p.dims, 1, grid, derive_seed(noise_seed, static_cast<std::uint64_t>(i)));
    out[i] = apply_chain(c.transforms, sample(p, 1, grid, nb, enc)[0]);
  });
  return PathBatch(std::move(out));
}

inline EvalOutcome evaluate(const RunConfig& c, const RunData& data, const NeuralSdeParams& p) {
  const SdeDims want = resolved_dims(c, data);
  require(p.dims.d_x == want.d_x && p.dims.d_c == want.d_c, ErrorKind::validation,
          "checkpoint dims (d_x " + std::to_string(p.dims.d_x) + ", d_c " + std::to_string(p.dims.d_c) +
              ") do not match the configured data (d_x " + std::to_string(want.d_x) + ", d_c " +
              std::to_string(want.d_c) + ")");
  const PathBatch gen = generate_for_eval(c, data, p);
  PathBatch real = data.test;
  if (data.conditional()) {
    std::vector<Path> ys;
    for (const auto& pr : data.test_pairs) ys.push_back(pr.y);
    real = PathBatch(std::move(ys));
  }
  KsProtocol kp;
  kp.times = c.eval.times;
  kp.repeats = c.eval.repeats;
  kp.batch = c.eval.batch;
  kp.alpha = c.eval.alpha;
  kp.seed = derive_seed(c.seed, "eval-ks");
  EvalOutcome e;
  e.ks = ks_marginal_protocol(gen, real, kp);
  const std::size_t lags = std::min(c.eval.acf_lags, real.length() - 1);
  e.acf_generated = acf(gen, lags);
  e.acf_real = acf(real, lags);
  e.cross_corr_generated = cross_corr_matrix(gen, c.eval.cross_corr_lags);
  e.cross_corr_real = cross_corr_matrix(real, c.eval.cross_corr_lags);
  try {
    e.cross_corr_mse = matrix_mse(e.cross_corr_generated, e.cross_corr_real);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::degenerate_data) throw;
  }
  if (real.channels() - real[0].first_value_channel() >= 2) {
    const std::size_t c0 = real[0].first_value_channel();
    e.hist_generated = terminal_corr_hist(gen, c0, c0 + 1, c.eval.hist_bins);
    e.hist_real = terminal_corr_hist(real, c0, c0 + 1, c.eval.hist_bins);
  }
  return e;
}

/// Writes ks.csv, acf_{generated,real}.csv, cross_corr_{generated,real}.csv
/// and report.json into out_dir.
inline EvalOutcome cmd_eval(const RunConfig& c, const std::string& checkpoint, const std::string& out_dir,
                            const std::string& dump_paths = {}) {
  namespace fs = std::filesystem;
  require(fs::is_regular_file(checkpoint), ErrorKind::io, "no such checkpoint '" + checkpoint + "'");
  const NeuralSdeParams p = load_checkpoint(checkpoint);
  const RunData data = prepare_data(c);
  const EvalOutcome e = evaluate(c, data, p);
  const fs::path dir(out_dir);
  detail::make_dir(dir);
  { auto os = detail::open_out(dir / "ks.csv"); write_ks_csv(os, e.ks); }
  { auto os = detail::open_out(dir / "acf_generated.csv"); write_acf_csv(os, e.acf_generated); }
  { auto os = detail::open_out(dir / "acf_real.csv"); write_acf_csv(os, e.acf_real); }
  { auto os = detail::open_out(dir / "cross_corr_generated.csv"); write_cross_corr_csv(os, e.cross_corr_generated, c.eval.cross_corr_lags); }
  { auto os = detail::open_out(dir / "cross_corr_real.csv"); write_cross_corr_csv(os, e.cross_corr_real, c.eval.cross_corr_lags); }
  nlohmann::json j = {{"ks", to_json(e.ks)},
                      {"acf_generated", to_json(e.acf_generated)},
                      {"acf_real", to_json(e.acf_real)},
                      {"cross_corr_lags", c.eval.cross_corr_lags},
                      {"cross_corr_generated", to_json(e.cross_corr_generated)},
                      {"cross_corr_real", to_json(e.cross_corr_real)},
                      {"cross_corr_mse", nullptr}};
  if (std::isfinite(e.cross_corr_mse)) j["cross_corr_mse"] = e.cross_corr_mse;
  if (e.hist_generated) {
    j["terminal_corr_hist_generated"] = to_json(*e.hist_generated);
    j["terminal_corr_hist_real"] = to_json(*e.hist_real);
  }
  { auto os = detail::open_out(dir / "report.json"); os << j.dump(2) << '\n'; }
  if (!dump_paths.empty()) {
    auto os = detail::open_out(dump_paths);
    write_paths_csv(os, generate_for_eval(c, data, p));
  }
  return e;
}

/// Gram matrix of the configured kernel (summed over its terms) between the
/// paths of two CSV files; `data2` empty means the first file against itself.
inline GramMatrix cmd_gram(const RunConfig& c, const std::string& data, const std::string& data2,
                           const std::string& out) {
  auto load = [](const std::string& f) {
    std::vector<Path> v;
    for (const auto& p : load_paths_csv(f)) v.push_back(time_augment(p));
    return PathBatch(std::move(v));
  };
  const PathBatch X = load(data);
  const PathBatch Y = data2.empty() ? X : load(data2);
  GramMatrix total;
  for (const auto& t : c.kernel.terms) {
    auto sc = [&](const PathBatch& b) { return map_batch(b, [&](const Path& p) { return scale(p, t.scale); }); };
    GramMatrix g = gram(sc(X), sc(Y), t.kernel, c.kernel.solver);
    if (total.entries.size() == 0)
      total = std::move(g);
    else
      total.entries += g.entries;
  }
  total.symmetric = data2.empty();
  auto os = detail::open_out(out);
  write_gram_csv(os, total);
  return total;
}

inline std::vector<GradcheckResult> cmd_gradcheck(const RunConfig& c) {
  GradcheckConfig g;
  g.dims = c.generator.dims;
  g.dims.d_x = 1;
  g.dims.d_c = 0;
  g.length = c.gradcheck.length;
  g.batch = c.gradcheck.batch;
  g.init_scale = c.gradcheck.init_scale;
  g.kernel = c.kernel;
  g.transforms = c.transforms;
  g.seed = c.seed;
  g.h = c.gradcheck.h;
  g.tol_pure = c.gradcheck.tol_pure;
  g.tol_pipeline = c.gradcheck.tol_pipeline;
  return run_gradcheck(g);
}

}  // namespace sigsde
