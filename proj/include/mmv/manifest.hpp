#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmv {

enum class Split { Unassigned, Train, Val, Test };
enum class LoadMode { Csv, PairedFolders, Suffix, Presplit };

std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view s);
std::string_view load_mode_name(LoadMode m) noexcept;
LoadMode parse_load_mode(std::string_view s);

struct SampleRecord {
  std::string id;
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> costmap;
  Split split = Split::Unassigned;
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  LoadMode mode = LoadMode::PairedFolders;
  std::vector<std::filesystem::path> roots;
  std::optional<double> val_ratio;
  std::optional<std::uint64_t> split_seed;
  std::vector<SampleRecord> records;  ///< sorted by id
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Directory and filename conventions for the four loading modes.
///  - csv: roots = {manifest.csv}; header `source,target[,costmap]`, paths
///    relative to the csv's directory.
///  - paired-folders: roots = {base} with `<source_dir>/`, `<target_dir>/`,
///    optional `<costmap_dir>/`; or roots = {source, target[, costmap]}.
///    Files pair by identical filename.
///  - suffix: roots = {dir}; `<stem>_IM.*` pairs with `<stem>_GT.*` and
///    optional `<stem>_CM.*`.
///  - presplit: roots = {base}; the paired-folders layout under `train/` and
///    `val/` (and optional `test/`), records pre-tagged.
struct DiscoverOptions {
  std::string source_dir = "source";
  std::string target_dir = "target";
  std::string costmap_dir = "costmap";
  std::string source_suffix = "_IM";
  std::string target_suffix = "_GT";
  std::string costmap_suffix = "_CM";
};

/// True for file extensions the pipeline reads (.ndt, .tif, .tiff).
bool is_image_file(const std::filesystem::path& p);

Manifest discover_pairs(LoadMode mode, const std::vector<std::filesystem::path>& roots,
                        const DiscoverOptions& options = {});

/// Tags round-half-even(val_ratio * N) records as val, the rest train. The
/// choice depends only on (seed, ids).
Manifest split(const Manifest& manifest, double val_ratio, std::uint64_t seed);

/// Number of validation records split() assigns.
std::size_t val_count(std::size_t n, double val_ratio);

/// ceil(fraction * n) with tolerance for binary rounding, clamped to [1, n].
std::size_t subset_size(std::size_t n, double fraction);

/// Ids served in `epoch` when only `fraction` of the data is resident and the
/// resident set rotates every `reload_every` epochs. Walks a seeded shuffle
/// of the ids as a ring, advancing one subset per block.
std::vector<std::string> epoch_subset(const std::vector<std::string>& ids, double fraction,
                                      std::size_t reload_every, std::size_t epoch, std::uint64_t seed);
std::vector<std::string> epoch_subset(const Manifest& manifest, double fraction,
                                      std::size_t reload_every, std::size_t epoch, std::uint64_t seed);

/// Byte-stable JSON (sorted keys, two-space indent, trailing LF).
std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace mmv
