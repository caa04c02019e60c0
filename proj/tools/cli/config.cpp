#include "config.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "mgpa/error.hpp"

namespace mgpa::cli {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  void get(const std::string& key, T& dst) {
    if (!has(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  T required(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + "." + key + " is required");
    T v{};
    get(key, v);
    return v;
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

void get_path(Section& s, const std::string& key, fs::path& dst, const fs::path& base) {
  std::string v;
  if (!s.has(key)) return;
  s.get(key, v);
  dst = resolve(v, base);
}

void parse_generate(const json& j, SynthSpec& spec) {
  Section s(j, "generate");
  if (s.has("grid")) {
    std::array<std::size_t, 3> g{};
    s.get("grid", g);
    spec.grid = Grid3{g[0], g[1], g[2]};
  }
  s.get("n_times", spec.n_times);
  if (s.has("t_range")) {
    std::array<double, 2> r{};
    s.get("t_range", r);
    spec.t_lo = r[0];
    spec.t_hi = r[1];
  }
  if (s.has("sources")) {
    const json& arr = s.raw("sources");
    if (!arr.is_array()) throw ConfigError(s.path("sources") + ": expected an array");
    spec.sources.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section src(arr[i], s.path("sources") + "[" + std::to_string(i) + "]");
      SourceDef d;
      src.get("alpha", d.alpha);
      src.get("lambda", d.lambda);
      src.get("density", d.density);
      src.finish();
      spec.sources.push_back(d);
    }
  }
  s.get("noise_rel", spec.noise_rel);
  if (s.has("noise_sigma")) spec.noise_sigma = s.required<double>("noise_sigma");
  s.get("spacing", spec.spacing);
  s.get("shuffle", spec.shuffle);
  if (s.has("images_per_timepoint")) {
    std::array<std::size_t, 2> r{};
    s.get("images_per_timepoint", r);
    spec.images_min = r[0];
    spec.images_max = r[1];
  }
  s.finish();
}

OmegaKlForm omega_kl_from(const std::string& v) {
  if (v == "textbook") return OmegaKlForm::kTextbook;
  if (v == "printed") return OmegaKlForm::kPrinted;
  throw ConfigError("fit.omega_kl must be \"textbook\" or \"printed\"");
}

InitMode init_from(const std::string& v) {
  if (v == "spectral") return InitMode::kSpectral;
  if (v == "random") return InitMode::kRandom;
  throw ConfigError("fit.init must be \"spectral\" or \"random\"");
}

void parse_fit(const json& j, FitSettings& f, const fs::path& base) {
  Section s(j, "fit");
  FitConfig& c = f.cfg;
  get_path(s, "data", f.data, base);
  s.get("resume", f.resume);
  s.get("checkpoint_every", f.checkpoint_every);
  s.get("stop_after", f.stop_after);
  s.get("plot_points", f.plot_points);
  s.get("lambdas", c.lambdas);
  s.get("spacing", c.spacing);
  s.get("n_rf", c.n_rf);
  s.get("n_epochs", c.n_epochs);
  s.get("batch_size", c.batch_size);
  s.get("block_len", c.block_len);
  s.get("lr_model", c.lr_model);
  s.get("lr_timeshift", c.lr_timeshift);
  s.get("lr_final_ratio", c.lr_final_ratio);
  s.get("gamma", c.gamma);
  s.get("n_mc", c.n_mc);
  s.get("prune_threshold", c.prune_threshold);
  s.get("optimize_timeshift", c.optimize_timeshift);
  if (s.has("omega_kl")) c.omega_kl = omega_kl_from(s.required<std::string>("omega_kl"));
  s.get("n_grid", c.n_grid);
  s.get("code_mean_var", c.code_mean_var);
  s.get("alpha_init", c.alpha_init);
  if (s.has("init")) c.init = init_from(s.required<std::string>("init"));
  s.get("init_lasso_iterations", c.init_lasso_iterations);
  s.get("init_threshold", c.init_threshold);
  s.get("init_inactive_scale", c.init_inactive_scale);
  s.get("init_active_alpha", c.init_active_alpha);
  s.get("init_temporal_var", c.init_temporal_var);
  s.get("shared_code_moments", c.shared_code_moments);
  s.get("adam_beta1", c.adam_beta1);
  s.get("adam_beta2", c.adam_beta2);
  s.get("adam_eps", c.adam_eps);
  if (s.has("temporal_init")) {
    Section t(s.raw("temporal_init"), s.path("temporal_init"));
    t.get("lengthscale", c.temporal_init.lengthscale);
    t.get("freq_var", c.temporal_init.freq_var);
    t.get("weight_mean_var", c.temporal_init.weight_mean_var);
    t.get("weight_var", c.temporal_init.weight_var);
    t.finish();
  }
  s.finish();
}

void parse_evaluate(const json& j, EvaluateSettings& e, const fs::path& base) {
  Section s(j, "evaluate");
  get_path(s, "fit_dir", e.fit_dir, base);
  get_path(s, "truth_dir", e.truth_dir, base);
  s.finish();
}

void parse_select_gamma(const json& j, SelectGammaSettings& g) {
  Section s(j, "select_gamma");
  s.get("grid", g.grid);
  s.get("pilot_epochs", g.pilot_epochs);
  s.finish();
}

void parse_baseline_pca(const json& j, BaselinePcaSettings& b, const fs::path& base) {
  Section s(j, "baseline_pca");
  get_path(s, "data", b.data, base);
  s.get("k", b.k);
  s.finish();
}

void validate(const RunConfig& rc) {
  try {
    rc.generate.validate();
    rc.fit.cfg.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  if (rc.fit.plot_points < 2) throw ConfigError("fit.plot_points must be >= 2");
  if (rc.select_gamma.grid.empty()) throw ConfigError("select_gamma.grid must not be empty");
  if (rc.select_gamma.pilot_epochs < 1) throw ConfigError("select_gamma.pilot_epochs must be >= 1");
  if (rc.baseline_pca.k < 1) throw ConfigError("baseline_pca.k must be >= 1");
  if (rc.threads && *rc.threads < 1) throw ConfigError("threads must be >= 1");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir,
                           const GlobalOptions& opts) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const fs::path base = fs::absolute(base_dir);
  RunConfig rc;
  Section s(j, "config");
  s.get("seed", rc.seed);
  get_path(s, "out", rc.out, base);
  if (s.has("threads")) rc.threads = s.required<int>("threads");
  if (s.has("generate")) parse_generate(s.raw("generate"), rc.generate);
  if (s.has("fit")) parse_fit(s.raw("fit"), rc.fit, base);
  if (s.has("evaluate")) parse_evaluate(s.raw("evaluate"), rc.evaluate, base);
  if (s.has("select_gamma")) parse_select_gamma(s.raw("select_gamma"), rc.select_gamma);
  if (s.has("baseline_pca")) parse_baseline_pca(s.raw("baseline_pca"), rc.baseline_pca, base);
  s.finish();

  if (opts.seed) rc.seed = *opts.seed;
  if (opts.out) rc.out = fs::absolute(*opts.out).lexically_normal();
  if (opts.threads) rc.threads = opts.threads;
  rc.generate.seed = rc.seed;
  rc.fit.cfg.seed = rc.seed;
  if (rc.baseline_pca.data.empty()) rc.baseline_pca.data = rc.fit.data;
  validate(rc);
  return rc;
}

RunConfig load_run_config(const GlobalOptions& opts) {
  if (!opts.config) return parse_run_config("{}", fs::current_path(), opts);
  std::ifstream in(*opts.config, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + opts.config->string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, fs::absolute(*opts.config).parent_path(), opts);
}

}  // namespace mgpa::cli
