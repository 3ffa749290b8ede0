#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmv/manifest.hpp"
#include "mmv/transforms.hpp"

namespace mmv {

inline constexpr std::string_view kPipelineVersion = "mmvpipe-cache/1";

/// Preprocessed blobs for one sample. Paths are relative to the cache dir.
struct CacheEntry {
  std::string key;
  std::map<std::string, std::string> blobs;  ///< role name -> "<kk>/<blob key>.ndt"
  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

struct CacheIndex {
  std::string pipeline_version{kPipelineVersion};
  std::string transforms;  ///< canonical transform configuration
  std::map<std::string, CacheEntry> entries;
  friend bool operator==(const CacheIndex&, const CacheIndex&) = default;
};

struct CacheStats {
  std::size_t records = 0;
  std::size_t rebuilt = 0;
  std::size_t reused = 0;
  std::size_t blobs_written = 0;
};

struct CacheBuild {
  CacheIndex index;
  CacheStats stats;
};

/// Content key of a sample: SHA-256 over pipeline version, transform
/// configuration and, per present role, file size and file SHA-256.
std::string record_content_key(const SampleRecord& record, const std::string& transforms_canonical);

/// Loads, transforms and stores every record, skipping records whose key
/// matches an existing entry with all blobs present. Writes index.json.
CacheBuild build_cache(const Manifest& manifest, const std::vector<TransformStep>& transforms,
                       const std::filesystem::path& cache_dir, std::size_t workers = 1);

std::string cache_index_to_json(const CacheIndex& index);
CacheIndex cache_index_from_json(const std::string& text);
/// Missing index file yields an empty index.
CacheIndex load_cache_index(const std::filesystem::path& cache_dir);

Image load_cached(const std::filesystem::path& cache_dir, const CacheEntry& entry, Role role);

}  // namespace mmv
