#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgpa/optimizer.hpp"
#include "mgpa/synth_bench.hpp"

namespace mgpa::cli {

namespace fs = std::filesystem;

// Bad configuration or unusable paths (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Estimate and truth cannot be compared (exit code 4).
class EvaluationMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<int> threads;
};

struct FitSettings {
  fs::path data;
  FitConfig cfg;
  // Continue from out/checkpoint when it exists.
  bool resume = false;
  // Save a checkpoint every this many steps (0: only at the end).
  std::size_t checkpoint_every = 0;
  // Stop once this many steps are done (0: run to completion). The output
  // is then a resumable partial fit.
  std::size_t stop_after = 0;
  std::size_t plot_points = 200;
};

struct EvaluateSettings {
  fs::path fit_dir;
  fs::path truth_dir;
};

struct SelectGammaSettings {
  std::vector<double> grid = {1.0, 10.0, 100.0, 1000.0};
  std::size_t pilot_epochs = 200;
};

struct BaselinePcaSettings {
  fs::path data;
  std::size_t k = 2;
};

// Settings of every command; each command reads its own section. Paths are
// absolute once parsed.
struct RunConfig {
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<int> threads;
  SynthSpec generate;
  FitSettings fit;
  EvaluateSettings evaluate;
  SelectGammaSettings select_gamma;
  BaselinePcaSettings baseline_pca;
};

// Parses the JSON text of a config file. Relative paths are resolved against
// base_dir; unknown keys throw ConfigError naming the key. Flags in opts
// override the file.
RunConfig parse_run_config(const std::string& text, const fs::path& base_dir,
                           const GlobalOptions& opts);
// Reads opts.config when set (all defaults otherwise).
RunConfig load_run_config(const GlobalOptions& opts);

}  // namespace mgpa::cli
