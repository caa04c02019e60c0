#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mgpa/optimizer.hpp"

namespace mgpa {

// A checkpoint is a directory holding manifest.json plus one MGPT tensor file
// per parameter block (for the parameters and both moment accumulators).
// Scalars that must survive bit-exactly are stored as one-element tensors.
void save_checkpoint(const std::filesystem::path& dir, const FitState& state);
FitState load_checkpoint(const std::filesystem::path& dir);

inline constexpr const char* kTraceHeader = "step,block,data,constraint,kl_codes,kl_omega,kl_w,total";

// Values are printed with 17 significant digits so that they parse back to
// the same doubles.
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

}  // namespace mgpa
