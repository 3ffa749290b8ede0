#include "mmv/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json_io.hpp"
#include "mmv/error.hpp"
#include "mmv/hash.hpp"

namespace mmv {

namespace fs = std::filesystem;

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Unassigned: return "unassigned";
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "unassigned") return Split::Unassigned;
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(Errc::ValidationError, "unknown split '" + std::string(s) + "'");
}

std::string_view load_mode_name(LoadMode m) noexcept {
  switch (m) {
    case LoadMode::Csv: return "csv";
    case LoadMode::PairedFolders: return "paired-folders";
    case LoadMode::Suffix: return "suffix";
    case LoadMode::Presplit: return "presplit";
  }
  return "paired-folders";
}

LoadMode parse_load_mode(std::string_view s) {
  if (s == "csv") return LoadMode::Csv;
  if (s == "paired-folders") return LoadMode::PairedFolders;
  if (s == "suffix") return LoadMode::Suffix;
  if (s == "presplit") return LoadMode::Presplit;
  throw Error(Errc::ValidationError,
              "unknown data mode '" + std::string(s) + "' (expected csv, paired-folders, suffix, presplit)");
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ndt" || ext == ".tif" || ext == ".tiff";
}

namespace {

/// Image files directly inside `dir`, sorted by filename.
std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.empty() || name[0] == '.') continue;
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path().lexically_normal());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void add_record(std::vector<SampleRecord>& records, SampleRecord r) {
  records.push_back(std::move(r));
}

void finalize(Manifest& m) {
  std::sort(m.records.begin(), m.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < m.records.size(); ++i)
    if (m.records[i].id == m.records[i - 1].id)
      throw Error(Errc::DuplicateId, "sample id '" + m.records[i].id + "' occurs more than once");
  if (m.records.empty()) throw Error(Errc::EmptyDataset, "no samples found");
}

void pair_folders(std::vector<SampleRecord>& out, const fs::path& src, const fs::path& tgt,
                  const std::optional<fs::path>& cm, Split tag) {
  for (const auto& s : list_images(src)) {
    const fs::path t = (tgt / s.filename()).lexically_normal();
    if (!fs::is_regular_file(t))
      throw Error(Errc::UnpairedSource, s.string() + " has no target " + t.string());
    SampleRecord r{s.stem().string(), s, t, std::nullopt, tag};
    if (cm) {
      const fs::path c = (*cm / s.filename()).lexically_normal();
      if (fs::is_regular_file(c)) r.costmap = c;
    }
    add_record(out, std::move(r));
  }
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back().push_back(c);
    }
  }
  return cells;
}

void discover_csv(std::vector<SampleRecord>& out, const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(Errc::IoError, "cannot open " + csv.string());
  const fs::path base = csv.parent_path();
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> n_cols;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto cells = parse_csv_line(line);
    if (!n_cols) {
      if (cells.size() < 2 || cells.size() > 3 || cells[0] != "source" || cells[1] != "target" ||
          (cells.size() == 3 && cells[2] != "costmap"))
        throw Error(Errc::ParseError, csv.string() + ": header must be source,target[,costmap]", lineno);
      n_cols = cells.size();
      continue;
    }
    if (cells.size() < 2 || cells.size() > *n_cols)
      throw Error(Errc::ParseError, csv.string() + ": wrong number of columns", lineno);
    auto resolve = [&](const std::string& cell) { return (base / cell).lexically_normal(); };
    SampleRecord r;
    r.source = resolve(cells[0]);
    r.id = r.source.stem().string();
    if (!fs::is_regular_file(r.source)) throw Error(Errc::IoError, "missing source " + r.source.string());
    if (cells[1].empty() || !fs::is_regular_file(resolve(cells[1])))
      throw Error(Errc::UnpairedSource, r.source.string() + " has no target");
    r.target = resolve(cells[1]);
    if (cells.size() == 3 && !cells[2].empty()) {
      r.costmap = resolve(cells[2]);
      if (!fs::is_regular_file(*r.costmap)) throw Error(Errc::IoError, "missing costmap " + r.costmap->string());
    }
    add_record(out, std::move(r));
  }
}

std::optional<fs::path> find_with_stem(const std::map<std::string, fs::path>& by_stem, const std::string& stem) {
  auto it = by_stem.find(stem);
  if (it == by_stem.end()) return std::nullopt;
  return it->second;
}

void discover_suffix(std::vector<SampleRecord>& out, const fs::path& dir, const DiscoverOptions& o) {
  const auto files = list_images(dir);
  std::map<std::string, fs::path> by_stem;  // first (sorted) file wins per stem
  for (const auto& f : files) by_stem.emplace(f.stem().string(), f);
  auto ends_with = [](const std::string& s, const std::string& suf) {
    return s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  };
  for (const auto& [stem, path] : by_stem) {
    if (!ends_with(stem, o.source_suffix)) continue;
    const std::string id = stem.substr(0, stem.size() - o.source_suffix.size());
    auto tgt = find_with_stem(by_stem, id + o.target_suffix);
    if (!tgt) throw Error(Errc::UnpairedSource, path.string() + " has no " + o.target_suffix + " partner");
    add_record(out, SampleRecord{id, path, *tgt, find_with_stem(by_stem, id + o.costmap_suffix), Split::Unassigned});
  }
}

}  // namespace

Manifest discover_pairs(LoadMode mode, const std::vector<fs::path>& roots, const DiscoverOptions& options) {
  Manifest m;
  m.mode = mode;
  for (const auto& r : roots) m.roots.push_back(r.lexically_normal());
  for (const auto& r : m.roots)
    if (!fs::exists(r)) throw Error(Errc::IoError, "data root does not exist: " + r.string());

  auto need_roots = [&](std::size_t lo, std::size_t hi) {
    if (roots.size() < lo || roots.size() > hi)
      throw Error(Errc::ValidationError, std::string(load_mode_name(mode)) + " mode takes " +
                                             std::to_string(lo) + ".." + std::to_string(hi) + " roots");
  };
  auto optional_dir = [](const fs::path& p) -> std::optional<fs::path> {
    return fs::is_directory(p) ? std::optional<fs::path>(p) : std::nullopt;
  };

  switch (mode) {
    case LoadMode::Csv:
      need_roots(1, 1);
      discover_csv(m.records, m.roots[0]);
      break;
    case LoadMode::PairedFolders:
      need_roots(1, 3);
      if (m.roots.size() == 1) {
        const auto& b = m.roots[0];
        pair_folders(m.records, b / options.source_dir, b / options.target_dir,
                     optional_dir(b / options.costmap_dir), Split::Unassigned);
      } else {
        pair_folders(m.records, m.roots[0], m.roots[1],
                     m.roots.size() == 3 ? std::optional<fs::path>(m.roots[2]) : std::nullopt, Split::Unassigned);
      }
      break;
    case LoadMode::Suffix:
      need_roots(1, 1);
      discover_suffix(m.records, m.roots[0], options);
      break;
    case LoadMode::Presplit: {
      need_roots(1, 1);
      const auto& b = m.roots[0];
      bool any = false;
      for (Split tag : {Split::Train, Split::Val, Split::Test}) {
        const fs::path sub = b / std::string(split_name(tag));
        if (!fs::is_directory(sub)) continue;
        any = true;
        pair_folders(m.records, sub / options.source_dir, sub / options.target_dir,
                     optional_dir(sub / options.costmap_dir), tag);
      }
      if (!any) throw Error(Errc::EmptyDataset, "presplit root has no train/ or val/ folder: " + b.string());
      break;
    }
  }
  finalize(m);
  return m;
}

std::size_t val_count(std::size_t n, double val_ratio) {
  // nearbyint under the default rounding mode rounds half to even.
  return static_cast<std::size_t>(std::nearbyint(val_ratio * double(n)));
}

Manifest split(const Manifest& manifest, double val_ratio, std::uint64_t seed) {
  if (!(val_ratio > 0.0 && val_ratio < 1.0)) throw Error(Errc::ValidationError, "val_ratio must be in (0,1)");
  for (const auto& r : manifest.records)
    if (r.split != Split::Unassigned)
      throw Error(Errc::AlreadySplit, "record '" + r.id + "' is already tagged " + std::string(split_name(r.split)));

  std::vector<std::size_t> order(manifest.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint64_t> keys(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) keys[i] = keyed_hash64(seed, manifest.records[i].id);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : manifest.records[a].id < manifest.records[b].id;
  });

  Manifest out = manifest;
  const std::size_t n_val = val_count(order.size(), val_ratio);
  for (std::size_t k = 0; k < order.size(); ++k) out.records[order[k]].split = k < n_val ? Split::Val : Split::Train;
  out.val_ratio = val_ratio;
  out.split_seed = seed;
  return out;
}

std::size_t subset_size(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(Errc::ValidationError, "epoch fraction must be in (0,1]");
  const auto m = static_cast<std::size_t>(std::ceil(fraction * double(n) - 1e-9));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n, 1));
}

std::vector<std::string> epoch_subset(const std::vector<std::string>& ids, double fraction,
                                      std::size_t reload_every, std::size_t epoch, std::uint64_t seed) {
  if (ids.empty()) throw Error(Errc::EmptyDataset, "epoch_subset of an empty id list");
  if (reload_every == 0) throw Error(Errc::ValidationError, "reload_every must be >= 1");
  const std::size_t n = ids.size();
  const std::size_t m = subset_size(n, fraction);

  std::vector<std::string> ring = ids;
  std::sort(ring.begin(), ring.end());
  std::stable_sort(ring.begin(), ring.end(), [&](const std::string& a, const std::string& b) {
    return keyed_hash64(seed, a) < keyed_hash64(seed, b);
  });

  const std::size_t block = epoch / reload_every;
  const std::size_t start = static_cast<std::size_t>((static_cast<unsigned __int128>(block) * m) % n);
  std::vector<std::string> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(ring[(start + i) % n]);
  return out;
}

std::vector<std::string> epoch_subset(const Manifest& manifest, double fraction, std::size_t reload_every,
                                      std::size_t epoch, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(manifest.records.size());
  for (const auto& r : manifest.records) ids.push_back(r.id);
  return epoch_subset(ids, fraction, reload_every, epoch, seed);
}

std::string manifest_to_json(const Manifest& m) {
  Json j;
  j["mode"] = std::string(load_mode_name(m.mode));
  Json params = Json::object();
  params["roots"] = Json::array();
  for (const auto& r : m.roots) params["roots"].push_back(r.generic_string());
  params["val_ratio"] = m.val_ratio ? Json(*m.val_ratio) : Json(nullptr);
  params["split_seed"] = m.split_seed ? Json(*m.split_seed) : Json(nullptr);
  j["params"] = params;
  j["records"] = Json::array();
  for (const auto& r : m.records) {
    Json rec;
    rec["id"] = r.id;
    rec["source"] = r.source.generic_string();
    rec["target"] = r.target.generic_string();
    rec["costmap"] = r.costmap ? Json(r.costmap->generic_string()) : Json(nullptr);
    rec["split"] = std::string(split_name(r.split));
    j["records"].push_back(rec);
  }
  return dump_json(j);
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const Json j = Json::parse(text);
    m.mode = parse_load_mode(j.at("mode").get<std::string>());
    const Json& p = j.at("params");
    for (const auto& r : p.at("roots")) m.roots.emplace_back(r.get<std::string>());
    if (!p.at("val_ratio").is_null()) m.val_ratio = p.at("val_ratio").get<double>();
    if (!p.at("split_seed").is_null()) m.split_seed = p.at("split_seed").get<std::uint64_t>();
    for (const auto& r : j.at("records")) {
      SampleRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.source = r.at("source").get<std::string>();
      rec.target = r.at("target").get<std::string>();
      if (r.contains("costmap") && !r.at("costmap").is_null()) rec.costmap = fs::path(r.at("costmap").get<std::string>());
      rec.split = parse_split(r.at("split").get<std::string>());
      m.records.push_back(std::move(rec));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) { write_text_atomic(path, manifest_to_json(m)); }

Manifest read_manifest(const fs::path& path) { return manifest_from_json(read_text(path)); }

}  // namespace mmv
