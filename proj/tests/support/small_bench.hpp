#pragma once

#include "mgpa/optimizer.hpp"
#include "mgpa/synth_bench.hpp"

namespace mgpa::testing {

// A benchmark small enough for unit tests: 6³ grid, 12 time points, two
// sigmoid sources at different scales.
inline SynthSpec small_spec(std::uint64_t seed, bool shuffle = false) {
  SynthSpec s;
  s.grid = {6, 6, 6};
  s.n_times = 12;
  s.sources = {{0.0, 1.0, 0.05}, {0.7, 0.5, 0.05}};
  s.shuffle = shuffle;
  s.images_min = 1;
  s.images_max = 3;
  s.seed = seed;
  return s;
}

inline FitConfig small_fit_config(std::uint64_t seed, std::size_t epochs = 40) {
  FitConfig c;
  c.lambdas = {1.0, 1.0, 0.5, 0.5};
  c.n_rf = 5;
  c.n_epochs = epochs;
  c.gamma = 10.0;
  c.n_grid = 16;
  c.seed = seed;
  return c;
}

}  // namespace mgpa::testing
