#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mmv/config.hpp"

namespace mmv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStartup = 1;  ///< config or startup failure
inline constexpr int kExitPartial = 2;  ///< some data items failed

/// Writes <output.dir>/effective_config.json.
void echo_config(const PipelineConfig& config);

/// The manifest at config.manifest_path() when it exists, otherwise a fresh
/// discover_pairs (plus split when data.val_ratio is set).
Manifest load_or_discover(const PipelineConfig& config);

/// Each command reports progress on `out`, one line per failure on `err`, and
/// returns an exit code. Errors that stop the whole command propagate as
/// mmv::Error; the CLI maps them to kExitStartup.
int cmd_pair(const PipelineConfig& config, std::ostream& out, std::ostream& err);
int cmd_cache(const PipelineConfig& config, std::ostream& out, std::ostream& err);
int cmd_run(const PipelineConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const PipelineConfig& config, std::ostream& out, std::ostream& err);
int cmd_inspect(const std::vector<std::filesystem::path>& files, std::ostream& out, std::ostream& err);

}  // namespace mmv
