#include "mgpa/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mgpa/tensor_io.hpp"
#include "json.hpp"

namespace mgpa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

Tensor block_tensor(const ModelState& s, ParamBlock b) {
  switch (b) {
    case ParamBlock::kFreqMean: return s.temporal.freq_mean;
    case ParamBlock::kFreqLogVar: return s.temporal.freq_log_var;
    case ParamBlock::kWeightMean: return s.temporal.weight_mean;
    case ParamBlock::kWeightLogVar: return s.temporal.weight_log_var;
    case ParamBlock::kLogLengthscale: return s.temporal.log_lengthscale;
    case ParamBlock::kCodeMean: return s.codes.mean;
    case ParamBlock::kCodeLogVar: return s.codes.log_var;
    case ParamBlock::kOffset: return Tensor::vector(s.offset.z);
    case ParamBlock::kLogSigma: return Tensor::vector({s.log_sigma});
    case ParamBlock::kTimeShift: return Tensor::vector(s.warp.delta);
  }
  return {};
}

void set_block(ModelState& s, ParamBlock b, Tensor t) {
  switch (b) {
    case ParamBlock::kFreqMean: s.temporal.freq_mean = std::move(t); return;
    case ParamBlock::kFreqLogVar: s.temporal.freq_log_var = std::move(t); return;
    case ParamBlock::kWeightMean: s.temporal.weight_mean = std::move(t); return;
    case ParamBlock::kWeightLogVar: s.temporal.weight_log_var = std::move(t); return;
    case ParamBlock::kLogLengthscale: s.temporal.log_lengthscale = std::move(t); return;
    case ParamBlock::kCodeMean: s.codes.mean = std::move(t); return;
    case ParamBlock::kCodeLogVar: s.codes.log_var = std::move(t); return;
    case ParamBlock::kOffset: s.offset.z.assign(t.values().begin(), t.values().end()); return;
    case ParamBlock::kLogSigma:
      require(t.size() == 1, "checkpoint: log_sigma must hold one value");
      s.log_sigma = t[0];
      return;
    case ParamBlock::kTimeShift: s.warp.delta.assign(t.values().begin(), t.values().end()); return;
  }
}

std::string omega_kl_name(OmegaKlForm f) { return f == OmegaKlForm::kPrinted ? "printed" : "textbook"; }

OmegaKlForm omega_kl_from(const std::string& s) {
  if (s == "printed") return OmegaKlForm::kPrinted;
  if (s == "textbook") return OmegaKlForm::kTextbook;
  throw std::runtime_error("checkpoint: unknown omega_kl form '" + s + "'");
}

void save_state(const fs::path& dir, const std::string& prefix, const ModelState& s, json& files) {
  for (ParamBlock b : kAllParamBlocks) {
    const std::string name = prefix + "_" + std::string(block_name(b)) + ".mgpt";
    write_tensor(dir / name, block_tensor(s, b));
    files[prefix][std::string(block_name(b))] = name;
  }
}

ModelState load_state(const fs::path& dir, const std::string& prefix, const json& files) {
  ModelState s;
  for (ParamBlock b : kAllParamBlocks) {
    const std::string name = files.at(prefix).at(std::string(block_name(b))).get<std::string>();
    set_block(s, b, read_tensor(dir / name));
  }
  s.temporal.n_sources = s.temporal.freq_mean.rows();
  s.temporal.n_rf = s.temporal.freq_mean.cols();
  return s;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const FitState& state) {
  fs::create_directories(dir);
  json m;
  m["format"] = "mgpa-checkpoint";
  m["version"] = kCheckpointVersion;
  m["step"] = state.step;
  m["adam_steps"] = state.adam_steps;
  m["data_scale"] = state.data_scale;
  m["time_origin"] = state.time_origin;
  m["time_scale"] = state.time_scale;
  m["lambdas"] = state.lambdas;
  m["spacing"] = state.spacing;
  m["grid"] = {state.grid.dz, state.grid.dy, state.grid.dx};
  m["gamma"] = state.gamma;
  m["prune_threshold"] = state.prune_threshold;
  m["omega_kl"] = omega_kl_name(state.omega_kl);
  json files;
  save_state(dir, "model", state.model, files);
  save_state(dir, "adam_m", state.adam_m, files);
  save_state(dir, "adam_v", state.adam_v, files);
  write_tensor(dir / "model_tau.mgpt", Tensor::vector(state.model.warp.tau));
  files["tau"] = "model_tau.mgpt";
  m["tensors"] = files;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

FitState load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  const json m = json::parse(in);
  if (m.at("format") != "mgpa-checkpoint" || m.at("version") != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported manifest format or version");
  }
  FitState st;
  st.step = m.at("step").get<std::uint64_t>();
  st.adam_steps = m.at("adam_steps").get<std::array<std::uint64_t, kAllParamBlocks.size()>>();
  st.data_scale = m.at("data_scale").get<double>();
  st.time_origin = m.at("time_origin").get<double>();
  st.time_scale = m.at("time_scale").get<double>();
  st.lambdas = m.at("lambdas").get<std::vector<double>>();
  st.spacing = m.at("spacing").get<double>();
  const auto g = m.at("grid").get<std::array<std::size_t, 3>>();
  st.grid = Grid3{g[0], g[1], g[2]};
  st.gamma = m.at("gamma").get<double>();
  st.prune_threshold = m.at("prune_threshold").get<double>();
  st.omega_kl = omega_kl_from(m.at("omega_kl").get<std::string>());
  const json& files = m.at("tensors");
  st.model = load_state(dir, "model", files);
  st.adam_m = load_state(dir, "adam_m", files);
  st.adam_v = load_state(dir, "adam_v", files);
  const Tensor tau = read_tensor(dir / files.at("tau").get<std::string>());
  st.model.warp.tau.assign(tau.values().begin(), tau.values().end());
  st.adam_m.warp.tau.assign(tau.size(), 0.0);
  st.adam_v.warp.tau.assign(tau.size(), 0.0);
  require(st.model.warp.tau.size() == st.model.warp.delta.size(),
          "checkpoint: τ and δ lengths differ");
  return st;
}

void write_trace_csv(const fs::path& path, std::span<const TraceRow> trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kTraceHeader << '\n';
  char buf[512];
  for (const TraceRow& r : trace) {
    const ElboBreakdown& e = r.elbo;
    std::snprintf(buf, sizeof buf, "%llu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.step),
                  std::string(block_kind_name(r.block)).c_str(), e.data_term, e.constraint_term,
                  e.kl_codes, e.kl_omega, e.kl_w, e.total);
    out << buf;
  }
}

std::vector<TraceRow> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error("trace: unexpected header in " + path.string());
  }
  std::vector<TraceRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::runtime_error("trace: malformed row '" + line + "'");
    TraceRow r;
    r.step = std::stoull(cells[0]);
    if (cells[1] == "model") {
      r.block = BlockKind::kModel;
    } else if (cells[1] == "timeshift") {
      r.block = BlockKind::kTimeShift;
    } else {
      throw std::runtime_error("trace: unknown block '" + cells[1] + "'");
    }
    r.elbo.data_term = std::stod(cells[2]);
    r.elbo.constraint_term = std::stod(cells[3]);
    r.elbo.kl_codes = std::stod(cells[4]);
    r.elbo.kl_omega = std::stod(cells[5]);
    r.elbo.kl_w = std::stod(cells[6]);
    r.elbo.total = std::stod(cells[7]);
    out.push_back(r);
  }
  return out;
}

}  // namespace mgpa
