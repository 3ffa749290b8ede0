#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmv/executor.hpp"
#include "mmv/manifest.hpp"
#include "mmv/metrics.hpp"
#include "mmv/tiling.hpp"
#include "mmv/transforms.hpp"

namespace mmv {

struct DataConfig {
  LoadMode mode = LoadMode::PairedFolders;
  std::vector<std::filesystem::path> roots;
  /// Where `pair` writes the manifest and where later commands read it.
  /// Defaults to <output.dir>/manifest.json.
  std::optional<std::filesystem::path> manifest;
  std::optional<double> val_ratio;
  std::uint64_t split_seed = 0;
  std::optional<std::filesystem::path> cache_dir;
  std::size_t cache_workers = 1;
  double epoch_fraction = 0.1;
  std::size_t reload_every = 5;
  DiscoverOptions layout;
};

struct InferenceConfig {
  TilingParams tiling;
  /// Files or directories to run on. Empty means every manifest source.
  std::vector<std::filesystem::path> inputs;
};

struct EvalConfig {
  std::vector<Metric> metrics{Metric::Pearson};
  double threshold = 0.5;
  std::optional<double> data_range;
  /// Predictions are read as <prediction_dir>/<id>.ndt. Defaults to output.dir.
  std::optional<std::filesystem::path> prediction_dir;
  std::size_t workers = 1;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  bool overwrite = false;
};

struct PipelineConfig {
  DataConfig data;
  std::vector<TransformStep> preprocess;
  ExecutorSpec executor;
  InferenceConfig inference;
  EvalConfig eval;
  OutputConfig output;

  std::filesystem::path manifest_path() const;
  std::filesystem::path prediction_dir() const;
};

/// Reads a YAML (or JSON) config, applies `overrides` ("a.b=value", value
/// parsed as YAML) in order, and validates. Relative paths resolve against
/// the config file's directory; data.cache_dir falls back to
/// $MMVPIPE_CACHE_DIR. Throws ParseError, UnknownKey or ValidationError.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Same as load_config but from text; `base_dir` anchors relative paths.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            const std::vector<std::string>& overrides = {});

/// Canonical effective config (sorted keys, absolute paths, every default
/// spelled out). Loading this text again yields the same config.
std::string config_to_json(const PipelineConfig& config);

}  // namespace mmv
