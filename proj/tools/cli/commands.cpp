#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "json.hpp"
#include "mgpa/checkpoint.hpp"
#include "mgpa/error.hpp"
#include "mgpa/metrics.hpp"
#include "mgpa/pca.hpp"
#include "mgpa/tensor_io.hpp"

namespace mgpa::cli {

namespace {

using ojson = nlohmann::ordered_json;

void require_out_dir(const fs::path& out) {
  if (out.empty()) throw ConfigError("no output directory: pass --out or set \"out\"");
  if (!fs::is_directory(out)) throw ConfigError("output directory does not exist: " + out.string());
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ConfigError("missing input file: " + p.string());
}

DataMatrix read_dataset(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("no dataset directory configured");
  require_file(dir / "data.json");
  return load_dataset(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataFormatError(path.string() + ": " + e.what(), e.byte);
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ojson spec_json(const SynthSpec& s) {
  ojson j;
  j["seed"] = s.seed;
  j["grid"] = {s.grid.dz, s.grid.dy, s.grid.dx};
  j["n_times"] = s.n_times;
  j["t_range"] = {s.t_lo, s.t_hi};
  auto& src = j["sources"] = ojson::array();
  for (const SourceDef& d : s.sources) {
    src.push_back({{"alpha", d.alpha}, {"lambda", d.lambda}, {"density", d.density}});
  }
  j["noise_rel"] = s.noise_rel;
  j["noise_sigma"] = s.noise_sigma ? ojson(*s.noise_sigma) : ojson(nullptr);
  j["spacing"] = s.spacing;
  j["shuffle"] = s.shuffle;
  j["images_per_timepoint"] = {s.images_min, s.images_max};
  return j;
}

ojson fit_config_json(const FitConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["lambdas"] = c.lambdas;
  j["spacing"] = c.spacing;
  j["n_rf"] = c.n_rf;
  j["n_epochs"] = c.n_epochs;
  j["batch_size"] = c.batch_size;
  j["block_len"] = c.block_len;
  j["lr_model"] = c.lr_model;
  j["lr_timeshift"] = c.lr_timeshift;
  j["lr_final_ratio"] = c.lr_final_ratio;
  j["gamma"] = c.gamma;
  j["n_mc"] = c.n_mc;
  j["prune_threshold"] = c.prune_threshold;
  j["optimize_timeshift"] = c.optimize_timeshift;
  j["omega_kl"] = c.omega_kl == OmegaKlForm::kPrinted ? "printed" : "textbook";
  j["init"] = c.init == InitMode::kSpectral ? "spectral" : "random";
  return j;
}

// Plot-ready CSVs: sources on an even grid over the warped time range, the
// central z slice of every map, and the time-shift of every sample.
void write_plots(const fs::path& dir, const FitState& st, const Tensor& maps, std::size_t n_points) {
  fs::create_directories(dir);
  const std::size_t ns = maps.rows();

  const std::vector<double> grid = evaluation_grid(st, n_points);
  const Tensor s = mean_sources(st, grid);
  std::string text = "t";
  for (std::size_t n = 0; n < ns; ++n) text += ",source_" + std::to_string(n);
  text += '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    text += num(grid[i]);
    for (std::size_t n = 0; n < ns; ++n) text += "," + num(s(i, n));
    text += '\n';
  }
  write_text(dir / "sources.csv", text);

  const Grid3 g = st.grid;
  const std::size_t z = g.dz / 2;
  text = "source,z,y,x,value\n";
  for (std::size_t n = 0; n < ns; ++n) {
    for (std::size_t y = 0; y < g.dy; ++y) {
      for (std::size_t x = 0; x < g.dx; ++x) {
        const std::size_t f = (z * g.dy + y) * g.dx + x;
        text += std::to_string(n) + "," + std::to_string(z) + "," + std::to_string(y) + "," +
                std::to_string(x) + "," + num(maps(n, f)) + "\n";
      }
    }
  }
  write_text(dir / "map_slices.csv", text);

  const TimeWarp& w = st.model.warp;
  const std::vector<double> t = w.warped_times();
  // nominal_time is in data units; delta and model_time in model time.
  text = "sample,nominal_time,delta,model_time\n";
  for (std::size_t p = 0; p < t.size(); ++p) {
    const double nominal = st.time_origin + st.time_scale * w.tau[p];
    text += std::to_string(p) + "," + num(nominal) + "," + num(w.delta[p]) + "," + num(t[p]) + "\n";
  }
  write_text(dir / "timeshift.csv", text);
}

struct Estimate {
  std::string method;
  Tensor sources;
  Tensor maps;
  std::vector<double> times;
  std::vector<std::size_t> active;
};

Estimate read_estimate(const fs::path& dir) {
  Estimate e;
  if (fs::is_regular_file(dir / "truth.json")) {
    const GroundTruth t = load_ground_truth(dir);
    e.method = "truth";
    e.sources = t.sources;
    e.maps = t.maps;
    e.times = t.times;
    e.active.resize(t.maps.rows());
    std::iota(e.active.begin(), e.active.end(), std::size_t{0});
    return e;
  }
  const fs::path manifest = dir / "estimate.json";
  const nlohmann::json j = read_json(manifest);
  try {
    e.method = j.at("method").get<std::string>();
    const auto& files = j.at("tensors");
    e.sources = read_tensor(dir / files.at("sources").get<std::string>());
    e.maps = read_tensor(dir / files.at("maps").get<std::string>());
    if (files.contains("times")) {
      const Tensor t = read_tensor(dir / files.at("times").get<std::string>());
      e.times.assign(t.values().begin(), t.values().end());
    }
    e.active = j.at("active").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataFormatError(manifest.string() + ": " + ex.what());
  }
  if (e.sources.ndim() != 2 || e.maps.ndim() != 2) {
    throw DataFormatError(manifest.string() + ": sources and maps must be matrices");
  }
  return e;
}

}  // namespace

void cmd_generate(const RunConfig& rc) {
  require_out_dir(rc.out);
  const SynthData d = generate(rc.generate);
  save_dataset(rc.out, d.data);
  save_ground_truth(rc.out / "truth", d.truth);
  write_json(rc.out / "spec.json", spec_json(rc.generate));
}

void cmd_fit(const RunConfig& rc) {
  require_out_dir(rc.out);
  const FitSettings& fset = rc.fit;
  const FitConfig& cfg = fset.cfg;
  const DataMatrix data = read_dataset(fset.data);
  const std::size_t total = cfg.total_steps(data.n_samples());
  const fs::path ckpt = rc.out / "checkpoint";
  const fs::path trace_path = rc.out / "trace.csv";

  FitState st;
  std::vector<TraceRow> trace;
  if (fset.resume && fs::is_regular_file(ckpt / "manifest.json")) {
    st = load_checkpoint(ckpt);
    if (!(st.grid == data.grid) || st.lambdas != cfg.lambdas ||
        st.model.warp.delta.size() != data.n_samples() || st.model.temporal.n_rf != cfg.n_rf) {
      throw ConfigError("checkpoint in " + ckpt.string() + " does not match the data or the fit settings");
    }
    if (fs::is_regular_file(trace_path)) trace = read_trace_csv(trace_path);
    std::erase_if(trace, [&](const TraceRow& r) { return r.step >= st.step; });
  } else {
    st = initialize_fit(data, cfg);
  }

  const std::size_t stop = fset.stop_after > 0 ? std::min(fset.stop_after, total) : total;
  while (st.step < stop) {
    const std::size_t next =
        fset.checkpoint_every > 0 ? std::min<std::size_t>(st.step + fset.checkpoint_every, stop) : stop;
    run_steps(st, data, cfg, next, &trace);
    if (next < stop) {
      save_checkpoint(ckpt, st);
      write_trace_csv(trace_path, trace);
    }
  }
  save_checkpoint(ckpt, st);
  write_trace_csv(trace_path, trace);

  const std::vector<double> times = st.model.warp.warped_times();
  const Tensor sources = mean_sources(st, times);
  const Tensor maps = mean_maps(st);
  write_tensor(rc.out / "sources.mgpt", sources);
  write_tensor(rc.out / "maps.mgpt", maps);
  write_tensor(rc.out / "times.mgpt", Tensor::vector(times));
  write_tensor(rc.out / "delta.mgpt", Tensor::vector(st.model.warp.delta));
  write_plots(rc.out / "plots", st, maps, fset.plot_points);

  const std::vector<std::size_t> active = active_sources(st);
  const MonotonicityReport mono = check_monotonicity(st);
  ojson j;
  j["method"] = "mgpa";
  j["steps"] = st.step;
  j["total_steps"] = total;
  j["complete"] = st.step == total;
  j["n_sources"] = maps.rows();
  j["active"] = active;
  j["source_energy"] = source_energy(st);
  j["monotonic"] = {{"ok", mono.ok()},
                    {"checked", mono.checked},
                    {"max_rel_slope", mono.max_rel_slope},
                    {"violations", mono.violations}};
  j["sigma"] = std::exp(st.model.log_sigma) * st.data_scale;
  j["elbo"] = trace.empty() ? ojson(nullptr) : ojson(trace.back().elbo.total);
  j["config"] = fit_config_json(cfg);
  j["tensors"] = {{"sources", "sources.mgpt"},
                  {"maps", "maps.mgpt"},
                  {"times", "times.mgpt"},
                  {"delta", "delta.mgpt"}};
  write_json(rc.out / "estimate.json", j);
}

void cmd_evaluate(const RunConfig& rc) {
  require_out_dir(rc.out);
  const EvaluateSettings& e = rc.evaluate;
  if (e.fit_dir.empty() || e.truth_dir.empty()) {
    throw ConfigError("evaluate needs evaluate.fit_dir and evaluate.truth_dir");
  }
  const Estimate est = read_estimate(e.fit_dir);
  require_file(e.truth_dir / "truth.json");
  const GroundTruth truth = load_ground_truth(e.truth_dir);

  const std::size_t n_true = truth.maps.rows();
  if (est.sources.rows() != truth.sources.rows()) {
    throw EvaluationMismatch("estimate has " + std::to_string(est.sources.rows()) +
                             " samples, truth has " + std::to_string(truth.sources.rows()));
  }
  if (est.maps.cols() != truth.maps.cols() || est.sources.cols() != est.maps.rows()) {
    throw EvaluationMismatch("estimate maps do not match the truth grid or the estimated sources");
  }
  if (est.maps.rows() < n_true) {
    throw EvaluationMismatch("estimate has " + std::to_string(est.maps.rows()) +
                             " sources, fewer than the " + std::to_string(n_true) + " true ones");
  }
  for (std::size_t a : est.active) {
    if (a >= est.maps.rows()) throw DataFormatError("estimate lists an active source out of range");
  }
  std::vector<std::size_t> candidates = est.active;
  if (candidates.size() < n_true) {
    candidates.resize(est.maps.rows());
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  }
  BenchReport r = evaluate_sources(est.sources, est.maps, candidates, truth, truth.grid);
  r.method = est.method;
  r.n_active_sources = est.active.size();
  if (truth.shuffle && est.times.size() == truth.times.size()) {
    r.timeshift_r2 = timeshift_r2(est.times, truth.times);
  }
  write_text(rc.out / "report.json", r.to_json() + "\n");
}

void cmd_select_gamma(const RunConfig& rc) {
  require_out_dir(rc.out);
  const DataMatrix data = read_dataset(rc.fit.data);
  const SelectGammaSettings& g = rc.select_gamma;
  const GammaSelection sel = select_gamma(data, rc.fit.cfg, g.grid, g.pilot_epochs);
  ojson j;
  j["gamma"] = sel.gamma;
  j["warning"] = sel.warning;
  j["pilot_epochs"] = g.pilot_epochs;
  auto& trials = j["trials"] = ojson::array();
  for (const GammaTrial& t : sel.trials) {
    trials.push_back(
        {{"gamma", t.gamma}, {"violations", t.violations}, {"worst_rel_slope", t.worst_rel_slope}});
  }
  write_json(rc.out / "gamma.json", j);
}

void cmd_baseline_pca(const RunConfig& rc) {
  require_out_dir(rc.out);
  const DataMatrix data = read_dataset(rc.baseline_pca.data);
  const std::size_t k = rc.baseline_pca.k;
  if (k > std::min(data.n_samples(), data.n_features())) {
    throw ConfigError("baseline_pca.k exceeds min(P, F)");
  }
  const PcaResult pca = pca_baseline(data.y, k);
  write_tensor(rc.out / "sources.mgpt", pca.scores);
  write_tensor(rc.out / "maps.mgpt", pca.components);
  std::vector<std::size_t> active(k);
  std::iota(active.begin(), active.end(), std::size_t{0});
  ojson j;
  j["method"] = "pca";
  j["n_sources"] = k;
  j["active"] = active;
  j["tensors"] = {{"sources", "sources.mgpt"}, {"maps", "maps.mgpt"}};
  write_json(rc.out / "estimate.json", j);
}

}  // namespace mgpa::cli
