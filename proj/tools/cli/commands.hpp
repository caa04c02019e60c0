#pragma once

#include "config.hpp"

namespace mgpa::cli {

// Output layout (all under rc.out, which must exist):
//   generate      data.json, data.mgpt, truth/, spec.json
//   fit           checkpoint/, trace.csv, estimate.json, sources.mgpt, maps.mgpt,
//                 times.mgpt, delta.mgpt, plots/{sources,map_slices,timeshift}.csv
//   evaluate      report.json
//   select-gamma  gamma.json
//   baseline-pca  estimate.json, sources.mgpt, maps.mgpt
// evaluate accepts either an estimate directory or a truth directory as the
// fit directory.
void cmd_generate(const RunConfig& rc);
void cmd_fit(const RunConfig& rc);
void cmd_evaluate(const RunConfig& rc);
void cmd_select_gamma(const RunConfig& rc);
void cmd_baseline_pca(const RunConfig& rc);

}  // namespace mgpa::cli
