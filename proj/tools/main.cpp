#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "mgpa/error.hpp"
#include "mgpa/parallel.hpp"

namespace {

namespace cli = mgpa::cli;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kDataParse = 3, kMismatch = 4 };

int run(const cli::GlobalOptions& opts, const std::function<void(const cli::RunConfig&)>& cmd) {
  try {
    const cli::RunConfig rc = cli::load_run_config(opts);
    if (rc.threads) mgpa::set_thread_count(*rc.threads);
    cmd(rc);
    return kOk;
  } catch (const cli::ConfigError& e) {
    std::cerr << "mgpa: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mgpa: " << e.what() << '\n';
    return kConfig;
  } catch (const mgpa::DataFormatError& e) {
    std::cerr << "mgpa: malformed input: " << e.what() << '\n';
    return kDataParse;
  } catch (const cli::EvaluationMismatch& e) {
    std::cerr << "mgpa: evaluation mismatch: " << e.what() << '\n';
    return kMismatch;
  } catch (const std::exception& e) {
    std::cerr << "mgpa: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monotonic Gaussian-process source separation for spatio-temporal data"};
  app.require_subcommand(1);
  app.fallthrough();

  cli::GlobalOptions opts;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  auto* o_config = app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  auto* o_seed = app.add_option("--seed", seed, "Random seed (overrides the config)");
  auto* o_out = app.add_option("--out", out, "Output directory (must exist)");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (default: $MGPA_THREADS)")
                        ->check(CLI::PositiveNumber);

  std::function<void(const cli::RunConfig&)> cmd;
  app.add_subcommand("generate", "Write a synthetic benchmark dataset and its ground truth")
      ->callback([&] { cmd = cli::cmd_generate; });
  app.add_subcommand("fit", "Fit the model to a dataset")->callback([&] { cmd = cli::cmd_fit; });
  app.add_subcommand("evaluate", "Score an estimate against the ground truth")
      ->callback([&] { cmd = cli::cmd_evaluate; });
  app.add_subcommand("select-gamma", "Pick the constraint strength from pilot fits")
      ->callback([&] { cmd = cli::cmd_select_gamma; });
  app.add_subcommand("baseline-pca", "Run the PCA baseline")
      ->callback([&] { cmd = cli::cmd_baseline_pca; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*o_config) opts.config = config;
  if (*o_seed) opts.seed = seed;
  if (*o_out) opts.out = out;
  if (*o_threads) opts.threads = threads;
  return run(opts, cmd);
}
