#include "mmv/commands.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>

#include "json_io.hpp"
#include "mmv/cache.hpp"
#include "mmv/io.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

Manifest discover(const PipelineConfig& c) {
  if (c.data.roots.empty()) throw Error(Errc::ValidationError, "data.roots: needed to discover pairs");
  Manifest m = discover_pairs(c.data.mode, c.data.roots, c.data.layout);
  if (c.data.val_ratio) m = split(m, *c.data.val_ratio, c.data.split_seed);
  return m;
}

struct RunInput {
  std::string id;
  fs::path path;
};

std::vector<RunInput> run_inputs(const PipelineConfig& c) {
  std::vector<RunInput> inputs;
  if (c.inference.inputs.empty()) {
    for (const auto& r : load_or_discover(c).records) inputs.push_back({r.id, r.source});
    return inputs;
  }
  for (const auto& p : c.inference.inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs.push_back({f.stem().string(), f});
    } else {
      inputs.push_back({p.stem().string(), p});
    }
  }
  std::map<std::string, fs::path> seen;
  for (const auto& in : inputs)
    if (auto [it, fresh] = seen.emplace(in.id, in.path); !fresh)
      throw Error(Errc::DuplicateId, "inputs " + it->second.string() + " and " + in.path.string() + " both map to output id '" +
                                         in.id + "'");
  return inputs;
}

}  // namespace

void echo_config(const PipelineConfig& config) {
  make_dirs(config.output.dir);
  write_text_atomic(config.output.dir / "effective_config.json", config_to_json(config));
}

Manifest load_or_discover(const PipelineConfig& config) {
  const fs::path p = config.manifest_path();
  if (fs::exists(p)) return read_manifest(p);
  return discover(config);
}

int cmd_pair(const PipelineConfig& config, std::ostream& out, std::ostream&) {
  echo_config(config);
  const Manifest m = discover(config);
  const fs::path p = config.manifest_path();
  make_dirs(p.parent_path());
  write_manifest(m, p);
  std::map<Split, std::size_t> tally;
  for (const auto& r : m.records) ++tally[r.split];
  out << "pair: " << m.records.size() << " records (";
  bool first = true;
  for (const auto& [s, n] : tally) {
    out << (first ? "" : ", ") << split_name(s) << " " << n;
    first = false;
  }
  out << ") -> " << p.string() << "\n";
  return kExitOk;
}

int cmd_cache(const PipelineConfig& config, std::ostream& out, std::ostream&) {
  if (!config.data.cache_dir) throw Error(Errc::ValidationError, "data.cache_dir: not set (config or MMVPIPE_CACHE_DIR)");
  echo_config(config);
  const Manifest m = load_or_discover(config);
  make_dirs(*config.data.cache_dir);
  const CacheBuild b = build_cache(m, config.preprocess, *config.data.cache_dir, config.data.cache_workers);
  out << "cache: " << b.stats.records << " records, " << b.stats.rebuilt << " rebuilt, " << b.stats.reused << " reused, "
      << b.stats.blobs_written << " blobs written -> " << config.data.cache_dir->string() << "\n";
  return kExitOk;
}

int cmd_run(const PipelineConfig& config, std::ostream& out, std::ostream& err) {
  using Clock = std::chrono::steady_clock;
  echo_config(config);
  const std::vector<RunInput> inputs = run_inputs(config);
  const auto executor = make_executor(config.executor);

  Json files = Json::array();
  std::size_t ok = 0, skipped = 0, failed = 0, windows = 0, calls = 0;
  const auto started = Clock::now();
  for (const auto& in : inputs) {
    const fs::path dest = config.output.dir / (in.id + ".ndt");
    Json entry{{"id", in.id}, {"input", in.path.string()}, {"output", dest.string()}};
    if (!config.output.overwrite && fs::exists(dest)) {
      entry["status"] = "skipped";
      files.push_back(entry);
      ++skipped;
      continue;
    }
    const auto t0 = Clock::now();
    SlidingStats stats;
    try {
      const Image src = apply_transforms(read_image(in.path), config.preprocess, Role::Source);
      const Image result = run_over_outer_axes(src, *executor, config.inference.tiling, &stats);
      write_text_atomic(dest, encode_ndt(result));
      entry["status"] = "ok";
      ++ok;
    } catch (const std::exception& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      err << "error: " << in.id << ": " << e.what() << "\n";
      ++failed;
    }
    entry["seconds"] = std::chrono::duration<double>(Clock::now() - t0).count();
    entry["windows"] = stats.windows;
    entry["executor_calls"] = stats.executor_calls;
    windows += stats.windows;
    calls += stats.executor_calls;
    files.push_back(entry);
  }

  Json summary{{"files", files},
               {"executor", {{"kind", std::string(executor_kind_name(config.executor.kind))},
                             {"max_batch", executor->max_batch() == std::size_t(-1) ? Json(nullptr) : Json(executor->max_batch())},
                             {"calls", calls}}},
               {"totals",
                {{"ok", ok},
                 {"skipped", skipped},
                 {"failed", failed},
                 {"windows", windows},
                 {"seconds", std::chrono::duration<double>(Clock::now() - started).count()}}}};
  write_text_atomic(config.output.dir / "run_summary.json", dump_json(summary));
  out << "run: " << ok << " ok, " << skipped << " skipped, " << failed << " failed -> " << config.output.dir.string() << "\n";
  return failed ? kExitPartial : kExitOk;
}

int cmd_eval(const PipelineConfig& config, std::ostream& out, std::ostream& err) {
  echo_config(config);
  const Manifest m = load_or_discover(config);
  std::vector<EvalPair> pairs;
  for (const auto& r : m.records) pairs.push_back({r.id, config.prediction_dir() / (r.id + ".ndt"), r.target});

  EvalOptions opts;
  opts.metrics = config.eval.metrics;
  opts.threshold = config.eval.threshold;
  opts.data_range = config.eval.data_range;
  opts.workers = config.eval.workers;
  const EvalResult result = evaluate_set(pairs, opts);
  write_text_atomic(config.output.dir / "eval_report.json", eval_report_json(result));
  for (const auto& f : result.failures)
    err << "error: " << f.id << (f.metric.empty() ? "" : " (" + f.metric + ")") << ": " << f.message << "\n";
  for (const auto& r : result.reports) out << r.line() << "\n";
  if (!result.failures.empty()) out << result.failures.size() << " sample failures excluded\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_inspect(const std::vector<fs::path>& files, std::ostream& out, std::ostream& err) {
  if (files.empty()) throw Error(Errc::InvalidArgument, "inspect needs at least one file");
  int code = kExitOk;
  for (const auto& f : files) {
    try {
      std::string ext = f.extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return char(std::tolower(ch)); });
      if (ext == ".ndt") {
        const NdtHeader h = read_ndt_header(f);
        out << f.string() << ": NDT v" << h.version << " " << dtype_name(h.dtype) << " axes=" << axes_string(h.axes)
            << " shape=" << shape_string(h.shape) << " payload=" << h.payload_bytes() << " bytes\n";
      } else if (ext == ".tif" || ext == ".tiff") {
        const TiffInfo t = read_tiff_info(f);
        out << f.string() << ": TIFF " << t.width << "x" << t.height << " " << t.bits_per_sample << "-bit "
            << (t.samples_per_pixel == 3 ? "rgb" : "gray") << " " << (t.tiled ? "tiled" : "stripped") << " "
            << (t.big_endian ? "big-endian" : "little-endian") << "\n";
      } else {
        throw Error(Errc::InvalidArgument, "unknown file type '" + ext + "' (.ndt, .tif, .tiff)");
      }
    } catch (const Error& e) {
      err << "error: " << f.string() << ": " << e.what() << "\n";
      code = kExitStartup;
    }
  }
  return code;
}

}  // namespace mmv
