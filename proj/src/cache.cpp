#include "mmv/cache.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "json_io.hpp"
#include "mmv/hash.hpp"
#include "mmv/io.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

std::vector<std::pair<Role, fs::path>> roles_of(const SampleRecord& r) {
  std::vector<std::pair<Role, fs::path>> out{{Role::Source, r.source}, {Role::Target, r.target}};
  if (r.costmap) out.emplace_back(Role::Costmap, *r.costmap);
  return out;
}

std::string blob_relpath(const std::string& record_key, Role role) {
  const std::string key = sha256_hex(record_key + ":" + std::string(role_name(role)));
  return key.substr(0, 2) + "/" + key + ".ndt";
}

bool entry_complete(const fs::path& dir, const CacheEntry& e) {
  for (const auto& [role, rel] : e.blobs) {
    // Blob filenames are their keys; a present file with the expected name
    // is the stored-key match.
    if (!fs::is_regular_file(dir / rel)) return false;
  }
  return !e.blobs.empty();
}

struct Outcome {
  CacheEntry entry;
  bool rebuilt = false;
  std::size_t written = 0;
};

Outcome process(const SampleRecord& rec, const std::vector<TransformStep>& steps, const std::string& canonical,
                const fs::path& dir, const CacheIndex& previous) {
  Outcome out;
  out.entry.key = record_content_key(rec, canonical);
  for (const auto& [role, path] : roles_of(rec)) out.entry.blobs[std::string(role_name(role))] = blob_relpath(out.entry.key, role);

  auto prev = previous.entries.find(rec.id);
  if (prev != previous.entries.end() && prev->second == out.entry && entry_complete(dir, out.entry)) return out;

  out.rebuilt = true;
  for (const auto& [role, path] : roles_of(rec)) {
    const Image raw = read_image(path);
    Image img;
    std::string current_op;
    try {
      img = raw;
      for (const auto& s : steps) {
        if (!s.applies_to(role)) continue;
        current_op = s.name();
        img = apply_transform(img, s);
      }
    } catch (const Error& e) {
      throw Error(Errc::TransformError,
                  "sample '" + rec.id + "' " + std::string(role_name(role)) + ", op " + current_op + ": " + e.what());
    }
    const fs::path blob = dir / out.entry.blobs.at(std::string(role_name(role)));
    fs::create_directories(blob.parent_path());
    write_text_atomic(blob, encode_ndt(img));
    ++out.written;
  }
  return out;
}

}  // namespace

std::string record_content_key(const SampleRecord& record, const std::string& transforms_canonical) {
  Sha256 h;
  h.field(kPipelineVersion).field(transforms_canonical);
  for (const auto& [role, path] : roles_of(record)) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw Error(Errc::IoError, "cannot stat " + path.string());
    h.field(role_name(role)).field(std::to_string(size)).field(sha256_file(path));
  }
  return h.hex();
}

CacheBuild build_cache(const Manifest& manifest, const std::vector<TransformStep>& transforms,
                       const fs::path& cache_dir, std::size_t workers) {
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec || !fs::is_directory(cache_dir)) throw Error(Errc::IoError, "cannot create cache dir " + cache_dir.string());

  const std::string canonical = transforms_canonical(transforms);
  const CacheIndex previous = load_cache_index(cache_dir);
  const auto& recs = manifest.records;
  std::vector<std::optional<Outcome>> results(recs.size());
  std::vector<std::exception_ptr> errors(recs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= recs.size() || failed) return;
      try {
        results[i] = process(recs[i], transforms, canonical, cache_dir, previous);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, recs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  CacheBuild build;
  build.index.transforms = canonical;
  build.stats.records = recs.size();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Outcome& o = *results[i];
    build.index.entries[recs[i].id] = o.entry;
    (o.rebuilt ? build.stats.rebuilt : build.stats.reused)++;
    build.stats.blobs_written += o.written;
  }
  write_text_atomic(cache_dir / "index.json", cache_index_to_json(build.index));
  return build;
}

std::string cache_index_to_json(const CacheIndex& index) {
  Json j;
  j["pipeline_version"] = index.pipeline_version;
  j["transforms"] = index.transforms;
  j["entries"] = Json::object();
  for (const auto& [id, e] : index.entries) {
    Json je;
    je["key"] = e.key;
    je["blobs"] = Json(e.blobs);
    j["entries"][id] = je;
  }
  return dump_json(j);
}

CacheIndex cache_index_from_json(const std::string& text) {
  CacheIndex idx;
  try {
    const Json j = Json::parse(text);
    idx.pipeline_version = j.at("pipeline_version").get<std::string>();
    idx.transforms = j.at("transforms").get<std::string>();
    for (const auto& [id, je] : j.at("entries").items()) {
      CacheEntry e;
      e.key = je.at("key").get<std::string>();
      e.blobs = je.at("blobs").get<std::map<std::string, std::string>>();
      idx.entries.emplace(id, std::move(e));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("cache index: ") + e.what());
  }
  return idx;
}

CacheIndex load_cache_index(const fs::path& cache_dir) {
  const fs::path p = cache_dir / "index.json";
  if (!fs::exists(p)) return CacheIndex{};
  return cache_index_from_json(read_text(p));
}

Image load_cached(const fs::path& cache_dir, const CacheEntry& entry, Role role) {
  auto it = entry.blobs.find(std::string(role_name(role)));
  if (it == entry.blobs.end()) throw Error(Errc::IoError, "cache entry has no " + std::string(role_name(role)) + " blob");
  return read_ndt(cache_dir / it->second);
}

}  // namespace mmv
