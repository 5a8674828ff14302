#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "sigsde/evalstats/stats.hpp"
#include "sigsde/nsde/train.hpp"
#include "sigsde/synthdata/simulators.hpp"

namespace sigsde {

struct DatasetSpec {
  enum class Source { gbm, rbergomi, file };
  Source source = Source::gbm;
  std::size_t n = 8192;
  std::size_t n_test = 2048;
  // Simulator grids are stepped(0, dt, length).
  double dt = 0.01;
  std::size_t length = 64;
  double mu = 0.0, sigma = 0.2, y0 = 1.0;
  double xi0 = 0.04, eta = 1.5, rho = -0.7, hurst = 0.2;
  bool include_variance = false;
  // File source: a CSV of paths, or a single series cut into windows when window > 0.
  std::string file;
  std::size_t window = 0;
  std::size_t stride = 1;
  bool median_filter = false;
  double test_fraction = 0.2;
  bool standardize = true;
};

struct ConditionalSpec {
  bool enabled = false;
  std::size_t past = 32;
  std::size_t future = 16;
  std::size_t fan_out = 32;
  std::size_t depth = 5;
  std::vector<ConditionTransform> transforms{ConditionTransform::time_normalize, ConditionTransform::lead_lag};
  PairOptions pairs;
};

struct GeneratorSpec {
  SdeDims dims{.d_a = 1, .d_y = 8, .d_w = 3, .hidden = {16}, .learn_initial = false};
  double init_scale = 1.0;
  /// Euler step of the generator grid, whose length follows the data; 0 spans [0, 1].
  double dt = 0.0;
};

struct ScheduleSpec {
  std::size_t steps = 100;
  std::size_t batch = 64;
  std::size_t checkpoint_every = 0;
  bool log_mmd = true;
};

struct EvalSpec {
  std::vector<std::size_t> times{6, 19, 32, 44, 57};
  std::size_t repeats = 5000;
  std::size_t batch = 128;
  double alpha = 0.05;
  std::size_t n_generated = 2048;
  std::size_t acf_lags = 10;
  std::vector<std::size_t> cross_corr_lags{0, 1, 2, 3, 4, 5};
  std::size_t hist_bins = 20;
};

struct GradcheckSpec {
  std::size_t length = 5;
  std::size_t batch = 3;
  double init_scale = 1.0;
  double h = 1e-5;
  double tol_pure = 1e-4;
  double tol_pipeline = 1e-3;
};

/// Everything a run depends on. The worker count is a CLI flag instead since
/// it never changes results.
struct RunConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  TransformChain transforms{{PathTransform::Kind::translate_to_zero, 1.0}, {PathTransform::Kind::time_normalize, 1.0}};
  GeneratorSpec generator;
  KernelSpec kernel;
  AdamConfig optimizer;
  ScheduleSpec schedule;
  ConditionalSpec conditional;
  EvalSpec eval;
  GradcheckSpec gradcheck;
};

namespace detail {

using nlohmann::json;

/// Reads one JSON object and records every problem as "<path>: <message>"
/// rather than stopping at the first. Unknown keys are reported when the
/// reader goes out of scope.
class FieldReader {
 public:
  FieldReader(const json* j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(&errors) {
    if (j_ && !j_->is_object()) {
      errors_->push_back(path_ + ": expected an object");
      j_ = nullptr;
    }
  }

  ~FieldReader() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) error(it.key(), "unknown key");
  }

  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void error(const std::string& key, const std::string& msg) const { errors_->push_back(where(key) + ": " + msg); }

  void check(const std::string& key, bool ok, const std::string& msg) const {
    if (!ok) error(key, msg);
  }

  bool present() const { return j_ != nullptr; }

  const json* raw(const std::string& key) {
    if (!j_ || !j_->contains(key)) return nullptr;
    seen_.insert(key);
    return &(*j_)[key];
  }

  FieldReader child(const std::string& key) { return FieldReader(raw(key), where(key), *errors_); }

  FieldReader element(const std::string& key, std::size_t i, const json& e) {
    return FieldReader(&e, where(key) + "[" + std::to_string(i) + "]", *errors_);
  }

  /// Leaves `out` unchanged when the key is absent or malformed; true when a
  /// value was read.
  template <class T>
  bool get(const std::string& key, T& out) {
    const json* v = raw(key);
    if (!v) return false;
    T tmp{};
    if (!convert(*v, tmp)) {
      error(key, std::string("expected ") + type_name<T>());
      return false;
    }
    out = std::move(tmp);
    return true;
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "a non-negative integer";
    else if constexpr (std::is_floating_point_v<T>) return "a finite number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  template <class T>
  static bool convert(const json& v, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return false;
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      // nlohmann stores programmatic non-negative ints as signed.
      std::uint64_t u = 0;
      if (v.is_number_unsigned())
        u = v.get<std::uint64_t>();
      else if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        u = static_cast<std::uint64_t>(v.get<std::int64_t>());
      else
        return false;
      if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) return false;
      out = static_cast<T>(u);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return false;
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return false;
      out = v.get<std::string>();
    } else {
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        typename T::value_type x{};
        if (!convert(e, x)) return false;
        out.push_back(x);
      }
    }
    return true;
  }

  const json* j_;
  std::string path_;
  std::vector<std::string>* errors_;
  std::set<std::string> seen_;
};

inline const char* to_string(DatasetSpec::Source s) {
  switch (s) {
    case DatasetSpec::Source::gbm: return "gbm";
    case DatasetSpec::Source::rbergomi: return "rbergomi";
    case DatasetSpec::Source::file: return "file";
  }
  return "?";
}

inline const char* to_string(SolverConfig::Scheme s) {
  return s == SolverConfig::Scheme::order2 ? "order2" : "order1";
}

inline void read_dataset(FieldReader& r, DatasetSpec& d) {
  std::string src = to_string(d.source);
  if (r.get("source", src)) {
    if (src == "gbm") d.source = DatasetSpec::Source::gbm;
    else if (src == "rbergomi") d.source = DatasetSpec::Source::rbergomi;
    else if (src == "file") d.source = DatasetSpec::Source::file;
    else r.error("source", "must be gbm, rbergomi or file");
  }
  r.get("n", d.n);
  r.get("n_test", d.n_test);
  r.get("dt", d.dt);
  r.get("length", d.length);
  r.get("standardize", d.standardize);
  r.check("dt", d.dt > 0 && std::isfinite(d.dt), "must be > 0");
  r.check("length", d.length >= 2, "must be >= 2");
  if (d.source != DatasetSpec::Source::file) {
    r.check("n", d.n >= 2, "must be >= 2");
    r.check("n_test", d.n_test >= 2, "must be >= 2");
  }
  {
    auto g = r.child("gbm");
    g.get("mu", d.mu);
    g.get("sigma", d.sigma);
    g.get("y0", d.y0);
    g.check("mu", std::isfinite(d.mu), "must be finite");
    g.check("sigma", d.sigma >= 0 && std::isfinite(d.sigma), "must be >= 0");
    g.check("y0", d.y0 > 0 && std::isfinite(d.y0), "must be > 0");
  }
  {
    auto b = r.child("rbergomi");
    b.get("xi0", d.xi0);
    b.get("eta", d.eta);
    b.get("rho", d.rho);
    b.get("H", d.hurst);
    b.get("include_variance", d.include_variance);
    b.check("xi0", d.xi0 > 0, "must be > 0");
    b.check("eta", d.eta >= 0 && std::isfinite(d.eta), "must be >= 0");
    b.check("rho", d.rho >= -1 && d.rho <= 1, "must lie in [-1, 1]");
    b.check("H", d.hurst > 0 && d.hurst <= 0.5, "must lie in (0, 1/2]");
  }
  {
    auto f = r.child("file");
    f.get("path", d.file);
    f.get("window", d.window);
    f.get("stride", d.stride);
    f.get("median_filter", d.median_filter);
    f.get("test_fraction", d.test_fraction);
    f.check("window", d.window == 0 || d.window >= 2, "must be 0 or >= 2");
    f.check("stride", d.stride >= 1, "must be >= 1");
    f.check("test_fraction", d.test_fraction >= 0 && d.test_fraction < 1, "must lie in [0, 1)");
    if (d.source == DatasetSpec::Source::file) {
      if (d.file.empty())
        f.error("path", "required when dataset.source is file");
      else if (!std::filesystem::is_regular_file(d.file))
        f.error("path", "no such file '" + d.file + "'");
    }
  }
}

inline void read_kernel(FieldReader& r, KernelSpec& k) {
  if (const json* terms = r.raw("terms")) {
    if (!terms->is_array() || terms->empty()) {
      r.error("terms", "expected a non-empty list");
    } else {
      k.terms.clear();
      for (std::size_t i = 0; i < terms->size(); ++i) {
        auto t = r.element("terms", i, (*terms)[i]);
        ScoreKernel sk;
        std::string type = "linear";
        t.get("type", type);
        try {
          sk.kernel.type = static_kernel_type_from_string(type);
        } catch (const Error&) {
          t.error("type", "unknown static kernel '" + type + "'");
        }
        t.get("sigma", sk.kernel.sigma);
        t.get("length_scale", sk.kernel.length_scale);
        t.get("F", sk.kernel.terms);
        t.get("scale", sk.scale);
        t.check("sigma", sk.kernel.sigma > 0 && std::isfinite(sk.kernel.sigma), "must be > 0");
        t.check("length_scale", sk.kernel.length_scale > 0 && std::isfinite(sk.kernel.length_scale), "must be > 0");
        t.check("F", sk.kernel.terms >= 1, "must be >= 1");
        t.check("scale", sk.scale > 0 && std::isfinite(sk.scale), "must be > 0");
        k.terms.push_back(sk);
      }
    }
  }
  r.get("dyadic_order", k.solver.dyadic_order);
  r.check("dyadic_order", k.solver.dyadic_order <= 10, "must be <= 10");
  std::string scheme = to_string(k.solver.scheme);
  if (r.get("scheme", scheme)) {
    if (scheme == "order1") k.solver.scheme = SolverConfig::Scheme::order1;
    else if (scheme == "order2") k.solver.scheme = SolverConfig::Scheme::order2;
    else r.error("scheme", "must be order1 or order2");
  }
}

inline void read_generator(FieldReader& r, GeneratorSpec& g) {
  SdeDims& d = g.dims;
  r.get("d_a", d.d_a);
  r.get("d_y", d.d_y);
  r.get("d_w", d.d_w);
  r.get("hidden", d.hidden);
  r.get("learn_initial", d.learn_initial);
  r.get("time_input", d.time_input);
  for (auto [key, slot] : {std::pair{"drift_final", &d.drift_final}, std::pair{"diffusion_final", &d.diffusion_final}}) {
    std::string s = to_string(*slot);
    if (r.get(key, s)) {
      if (s == "tanh") *slot = FinalActivation::tanh;
      else if (s == "identity") *slot = FinalActivation::identity;
      else r.error(key, "must be tanh or identity");
    }
  }
  r.get("init_scale", g.init_scale);
  r.get("dt", g.dt);
  r.check("d_y", d.d_y >= 1, "must be >= 1");
  r.check("d_w", d.d_w >= 1, "must be >= 1");
  r.check("d_a", !d.learn_initial || d.d_a >= 1, "must be >= 1 when learn_initial");
  bool widths = true;
  for (auto h : d.hidden) widths = widths && h >= 1;
  r.check("hidden", widths, "layer widths must be >= 1");
  r.check("init_scale", g.init_scale >= 0 && std::isfinite(g.init_scale), "must be >= 0");
  r.check("dt", g.dt >= 0 && std::isfinite(g.dt), "must be >= 0");
}

inline void read_transforms(FieldReader& r, const std::string& key, TransformChain& chain) {
  std::vector<std::string> names;
  if (!r.get(key, names)) return;
  chain.clear();
  for (const auto& s : names) {
    try {
      chain.push_back(PathTransform::parse(s));
    } catch (const Error& e) {
      r.error(key, e.what());
    }
  }
}

inline void read_conditional(FieldReader& r, ConditionalSpec& c) {
  c.enabled = r.present();
  r.get("past", c.past);
  r.get("future", c.future);
  r.get("fan_out", c.fan_out);
  r.get("depth", c.depth);
  std::vector<std::string> names;
  if (r.get("transforms", names)) {
    c.transforms.clear();
    for (const auto& s : names) {
      try {
        c.transforms.push_back(condition_transform_from_string(s));
      } catch (const Error& e) {
        r.error("transforms", e.what());
      }
    }
  }
  r.get("normalize_initial", c.pairs.normalize_initial);
  r.get("scale", c.pairs.scale);
  r.get("translate", c.pairs.translate);
  r.check("past", c.past >= 2, "must be >= 2");
  r.check("future", c.future >= 2, "must be >= 2");
  r.check("fan_out", c.fan_out >= 2, "must be >= 2");
  r.check("depth", c.depth >= 1 && c.depth <= 8, "must lie in [1, 8]");
  r.check("scale", c.pairs.scale > 0 && std::isfinite(c.pairs.scale), "must be > 0");
}

inline void read_eval(FieldReader& r, EvalSpec& e) {
  r.get("times", e.times);
  r.get("repeats", e.repeats);
  r.get("batch", e.batch);
  r.get("alpha", e.alpha);
  r.get("n_generated", e.n_generated);
  r.get("acf_lags", e.acf_lags);
  r.get("cross_corr_lags", e.cross_corr_lags);
  r.get("hist_bins", e.hist_bins);
  r.check("times", !e.times.empty(), "must be non-empty");
  r.check("repeats", e.repeats >= 1, "must be >= 1");
  r.check("batch", e.batch >= 1, "must be >= 1");
  r.check("alpha", e.alpha > 0 && e.alpha < 1, "must lie in (0, 1)");
  r.check("n_generated", e.n_generated >= e.batch, "must be >= eval.batch");
  r.check("cross_corr_lags", !e.cross_corr_lags.empty(), "must be non-empty");
  r.check("hist_bins", e.hist_bins >= 1, "must be >= 1");
}

inline void read_gradcheck(FieldReader& r, GradcheckSpec& g) {
  r.get("length", g.length);
  r.get("batch", g.batch);
  r.get("init_scale", g.init_scale);
  r.get("h", g.h);
  r.get("tol_pure", g.tol_pure);
  r.get("tol_pipeline", g.tol_pipeline);
  r.check("length", g.length >= 2, "must be >= 2");
  r.check("batch", g.batch >= 2, "must be >= 2");
  r.check("h", g.h > 0, "must be > 0");
  r.check("tol_pure", g.tol_pure > 0, "must be > 0");
  r.check("tol_pipeline", g.tol_pipeline > 0, "must be > 0");
}

}  // namespace detail

/// Parses and validates a config. All violations are collected and reported
/// together in one validation error.
inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  std::vector<std::string> errors;
  {
    detail::FieldReader r(&j, "", errors);
    r.get("experiment", c.experiment);
    r.get("seed", c.seed);
    { auto s = r.child("dataset"); detail::read_dataset(s, c.dataset); }
    detail::read_transforms(r, "transforms", c.transforms);
    { auto s = r.child("generator"); detail::read_generator(s, c.generator); }
    { auto s = r.child("kernel"); detail::read_kernel(s, c.kernel); }
    {
      auto s = r.child("optimizer");
      s.get("lr", c.optimizer.lr);
      s.get("beta1", c.optimizer.beta1);
      s.get("beta2", c.optimizer.beta2);
      s.get("eps", c.optimizer.eps);
      s.check("lr", c.optimizer.lr >= 0 && std::isfinite(c.optimizer.lr), "must be >= 0");
      s.check("beta1", c.optimizer.beta1 >= 0 && c.optimizer.beta1 < 1, "must lie in [0, 1)");
      s.check("beta2", c.optimizer.beta2 >= 0 && c.optimizer.beta2 < 1, "must lie in [0, 1)");
      s.check("eps", c.optimizer.eps > 0, "must be > 0");
    }
    {
      auto s = r.child("schedule");
      s.get("steps", c.schedule.steps);
      s.get("batch", c.schedule.batch);
      s.get("checkpoint_every", c.schedule.checkpoint_every);
      s.get("log_mmd", c.schedule.log_mmd);
      s.check("batch", c.schedule.batch >= (r.raw("conditional") ? 1 : 2), "must be >= 2");
    }
    { auto s = r.child("conditional"); detail::read_conditional(s, c.conditional); }
    { auto s = r.child("eval"); detail::read_eval(s, c.eval); }
    { auto s = r.child("gradcheck"); detail::read_gradcheck(s, c.gradcheck); }

    const auto& d = c.dataset;
    if (c.conditional.enabled) {
      r.check("dataset.standardize", !d.standardize, "must be false for conditional runs (pairs are rebased instead)");
      if (d.source != DatasetSpec::Source::file)
        r.check("conditional", c.conditional.past + c.conditional.future <= d.length,
                "past + future exceeds dataset.length");
      if (d.source == DatasetSpec::Source::file && d.window > 0)
        r.check("conditional", c.conditional.past + c.conditional.future <= d.window,
                "past + future exceeds dataset.file.window");
    } else if (d.source != DatasetSpec::Source::file) {
      bool in_range = true;
      for (auto t : c.eval.times) in_range = in_range && t < d.length;
      r.check("eval.times", in_range, "every time index must be < dataset.length");
      r.check("dataset.n", d.n >= c.schedule.batch, "must be >= schedule.batch");
      r.check("eval.batch", d.n_test >= c.eval.batch, "must be <= dataset.n_test");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorKind::validation, msg);
  }
  return c;
}

inline RunConfig load_config(const std::string& file) {
  std::ifstream is(file);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open config " + file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::validation, file + ": " + e.what());
  }
  return parse_config(j);
}

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& d = c.dataset;
  json ds = {{"source", detail::to_string(d.source)},
             {"n", d.n},
             {"n_test", d.n_test},
             {"dt", d.dt},
             {"length", d.length},
             {"standardize", d.standardize},
             {"gbm", {{"mu", d.mu}, {"sigma", d.sigma}, {"y0", d.y0}}},
             {"rbergomi",
              {{"xi0", d.xi0}, {"eta", d.eta}, {"rho", d.rho}, {"H", d.hurst}, {"include_variance", d.include_variance}}},
             {"file",
              {{"path", d.file},
               {"window", d.window},
               {"stride", d.stride},
               {"median_filter", d.median_filter},
               {"test_fraction", d.test_fraction}}}};
  json chain = json::array();
  for (const auto& t : c.transforms) chain.push_back(t.str());
  const SdeDims& g = c.generator.dims;
  json gen = {{"d_a", g.d_a},
              {"d_y", g.d_y},
              {"d_w", g.d_w},
              {"hidden", g.hidden},
              {"learn_initial", g.learn_initial},
              {"time_input", g.time_input},
              {"drift_final", to_string(g.drift_final)},
              {"diffusion_final", to_string(g.diffusion_final)},
              {"init_scale", c.generator.init_scale},
              {"dt", c.generator.dt}};
  json terms = json::array();
  for (const auto& t : c.kernel.terms)
    terms.push_back({{"type", to_string(t.kernel.type)},
                     {"sigma", t.kernel.sigma},
                     {"length_scale", t.kernel.length_scale},
                     {"F", t.kernel.terms},
                     {"scale", t.scale}});
  json out = {
      {"experiment", c.experiment},
      {"seed", c.seed},
      {"dataset", ds},
      {"transforms", chain},
      {"generator", gen},
      {"kernel",
       {{"terms", terms}, {"dyadic_order", c.kernel.solver.dyadic_order}, {"scheme", detail::to_string(c.kernel.solver.scheme)}}},
      {"optimizer",
       {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps}}},
      {"schedule",
       {{"steps", c.schedule.steps},
        {"batch", c.schedule.batch},
        {"checkpoint_every", c.schedule.checkpoint_every},
        {"log_mmd", c.schedule.log_mmd}}},
      {"eval",
       {{"times", c.eval.times},
        {"repeats", c.eval.repeats},
        {"batch", c.eval.batch},
        {"alpha", c.eval.alpha},
        {"n_generated", c.eval.n_generated},
        {"acf_lags", c.eval.acf_lags},
        {"cross_corr_lags", c.eval.cross_corr_lags},
        {"hist_bins", c.eval.hist_bins}}},
      {"gradcheck",
       {{"length", c.gradcheck.length},
        {"batch", c.gradcheck.batch},
        {"init_scale", c.gradcheck.init_scale},
        {"h", c.gradcheck.h},
        {"tol_pure", c.gradcheck.tol_pure},
        {"tol_pipeline", c.gradcheck.tol_pipeline}}}};
  if (c.conditional.enabled) {
    json ct = json::array();
    for (auto t : c.conditional.transforms) ct.push_back(to_string(t));
    out["conditional"] = {{"past", c.conditional.past},
                          {"future", c.conditional.future},
                          {"fan_out", c.conditional.fan_out},
                          {"depth", c.conditional.depth},
                          {"transforms", ct},
                          {"normalize_initial", c.conditional.pairs.normalize_initial},
                          {"scale", c.conditional.pairs.scale},
                          {"translate", c.conditional.pairs.translate}};
  }
  return out;
}

}  // namespace sigsde
