#include "mmv/config.hpp"

#include <cstdlib>
#include <regex>

#include <yaml-cpp/yaml.h>

#include "json_io.hpp"
#include "transform_json.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw Error(Errc::ValidationError, where + ": " + what);
}

Json plain_scalar(const std::string& s) {
  static const std::regex int_re(R"([-+]?[0-9]+)");
  static const std::regex float_re(R"([-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?)");
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (std::regex_match(s, int_re)) {
    errno = 0;
    const long long v = std::strtoll(s.c_str(), nullptr, 10);
    if (errno == 0) return v;
  }
  if (std::regex_match(s, float_re)) return std::strtod(s.c_str(), nullptr);
  return s;
}

Json yaml_to_json(const YAML::Node& node) {
  const std::string& tag = node.Tag();
  if (!tag.empty() && tag != "?" && tag != "!")
    throw Error(Errc::ParseError, "line " + std::to_string(node.Mark().line + 1) + ": tags are not supported (" + tag + ")",
                std::size_t(node.Mark().line + 1));
  switch (node.Type()) {
    case YAML::NodeType::Undefined:
    case YAML::NodeType::Null: return nullptr;
    case YAML::NodeType::Scalar: return tag == "!" ? Json(node.Scalar()) : plain_scalar(node.Scalar());
    case YAML::NodeType::Sequence: {
      Json a = Json::array();
      for (const auto& item : node) a.push_back(yaml_to_json(item));
      return a;
    }
    case YAML::NodeType::Map: {
      Json o = Json::object();
      for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (o.contains(key))
          throw Error(Errc::ParseError, "line " + std::to_string(kv.first.Mark().line + 1) + ": duplicate key '" + key + "'",
                      std::size_t(kv.first.Mark().line + 1));
        o[key] = yaml_to_json(kv.second);
      }
      return o;
    }
  }
  return nullptr;
}

Json parse_yaml(const std::string& text, const std::string& origin) {
  try {
    const YAML::Node root = YAML::Load(text);
    return yaml_to_json(root);
  } catch (const YAML::Exception& e) {
    const auto line = std::size_t(e.mark.line + 1);
    throw Error(Errc::ParseError, origin + " line " + std::to_string(line) + ": " + e.msg, line);
  }
}

void apply_override(Json& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) invalid("override '" + text + "'", "expected key=value");
  const std::string path = text.substr(0, eq);
  const Json value = parse_yaml(text.substr(eq + 1), "override '" + path + "'");

  Json* cur = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) invalid("override '" + path + "'", "empty path segment");
    Json* next = nullptr;
    if (cur->is_array()) {
      if (seg.find_first_not_of("0123456789") != std::string::npos || std::stoul(seg) >= cur->size())
        invalid("override '" + path + "'", "'" + seg + "' is not an index into a list of " + std::to_string(cur->size()));
      next = &(*cur)[std::stoul(seg)];
    } else {
      if (cur->is_null()) *cur = Json::object();
      if (!cur->is_object()) invalid("override '" + path + "'", "'" + seg + "' is below a scalar");
      next = &(*cur)[seg];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    cur = next;
    start = dot + 1;
  }
}

// Typed field readers. Each returns false when the key is absent or null.
struct Section {
  const Json& j;
  std::string where;

  std::string path(const std::string& key) const { return where + "." + key; }
  const Json* find(const std::string& key) const {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? nullptr : &*it;
  }

  bool number(const std::string& key, double& out) const {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_number()) invalid(path(key), "expected a number");
    out = v->get<double>();
    return true;
  }
  bool count(const std::string& key, std::size_t& out) const {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_number_integer() || v->get<long long>() < 0) invalid(path(key), "expected a non-negative integer");
    out = v->get<std::size_t>();
    return true;
  }
  bool flag(const std::string& key, bool& out) const {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_boolean()) invalid(path(key), "expected true or false");
    out = v->get<bool>();
    return true;
  }
  bool text(const std::string& key, std::string& out) const {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_string()) invalid(path(key), "expected a string");
    out = v->get<std::string>();
    return true;
  }
  // A scalar or a list of scalars.
  template <typename Fn>
  bool list(const std::string& key, Fn&& each) const {
    const Json* v = find(key);
    if (!v) return false;
    if (v->is_array()) {
      for (std::size_t i = 0; i < v->size(); ++i) each((*v)[i], path(key) + "[" + std::to_string(i) + "]");
    } else {
      each(*v, path(key));
    }
    return true;
  }
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

std::string as_string(const Json& v, const std::string& where) {
  if (!v.is_string()) invalid(where, "expected a string");
  return v.get<std::string>();
}

void parse_data(const Json& j, const fs::path& base, DataConfig& d) {
  reject_unknown_keys(j, {"mode", "roots", "manifest", "val_ratio", "split_seed", "cache_dir", "cache_workers",
                          "epoch_fraction", "reload_every", "source_dir", "target_dir", "costmap_dir", "source_suffix",
                          "target_suffix", "costmap_suffix"},
                      "data");
  const Section s{j, "data"};
  std::string t;
  if (s.text("mode", t)) {
    try {
      d.mode = parse_load_mode(t);
    } catch (const Error& e) {
      invalid("data.mode", e.detail());
    }
  }
  s.list("roots", [&](const Json& v, const std::string& where) { d.roots.push_back(resolve(base, as_string(v, where))); });
  for (std::size_t i = 0; i < d.roots.size(); ++i)
    if (!fs::exists(d.roots[i])) invalid("data.roots[" + std::to_string(i) + "]", "'" + d.roots[i].string() + "' does not exist");
  if (s.text("manifest", t)) d.manifest = resolve(base, t);
  double r;
  if (s.number("val_ratio", r)) {
    if (!(r > 0.0 && r < 1.0)) invalid("data.val_ratio", "must be in (0,1), got " + Json(r).dump());
    d.val_ratio = r;
  }
  if (const Json* v = s.find("split_seed")) {
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
      invalid("data.split_seed", "expected a non-negative integer");
    d.split_seed = v->get<std::uint64_t>();
  }
  if (s.text("cache_dir", t)) d.cache_dir = resolve(base, t);
  s.count("cache_workers", d.cache_workers);
  if (d.cache_workers < 1) invalid("data.cache_workers", "must be >= 1");
  s.number("epoch_fraction", d.epoch_fraction);
  if (!(d.epoch_fraction > 0.0 && d.epoch_fraction <= 1.0))
    invalid("data.epoch_fraction", "must be in (0,1], got " + Json(d.epoch_fraction).dump());
  s.count("reload_every", d.reload_every);
  if (d.reload_every < 1) invalid("data.reload_every", "must be >= 1");
  s.text("source_dir", d.layout.source_dir);
  s.text("target_dir", d.layout.target_dir);
  s.text("costmap_dir", d.layout.costmap_dir);
  s.text("source_suffix", d.layout.source_suffix);
  s.text("target_suffix", d.layout.target_suffix);
  s.text("costmap_suffix", d.layout.costmap_suffix);
}

void parse_executor(const Json& j, const fs::path& base, ExecutorSpec& e) {
  reject_unknown_keys(j, {"kind", "spatial_rank", "in_channels", "out_channels", "sigma", "gain", "bias", "threshold",
                          "command", "timeout_s", "pool_size"},
                      "executor");
  const Section s{j, "executor"};
  std::string t;
  if (s.text("kind", t)) {
    try {
      e.kind = parse_executor_kind(t);
    } catch (const Error& err) {
      invalid("executor.kind", err.detail());
    }
  }
  std::size_t rank = std::size_t(e.spatial_rank);
  if (s.count("spatial_rank", rank)) e.spatial_rank = int(std::min<std::size_t>(rank, 1000));
  s.count("in_channels", e.in_channels);
  s.count("out_channels", e.out_channels);
  std::vector<double> sigma;
  if (s.list("sigma", [&](const Json& v, const std::string& where) {
        if (!v.is_number()) invalid(where, "expected a number");
        sigma.push_back(v.get<double>());
      }))
    e.sigma = sigma;
  s.number("gain", e.gain);
  s.number("bias", e.bias);
  s.number("threshold", e.threshold);
  std::vector<std::string> command;
  if (s.list("command", [&](const Json& v, const std::string& where) { command.push_back(as_string(v, where)); })) {
    // A relative program path containing a slash is taken relative to the config.
    if (!command.empty() && command[0].find('/') != std::string::npos && fs::path(command[0]).is_relative())
      command[0] = resolve(base, command[0]).string();
    e.command = command;
  }
  s.number("timeout_s", e.timeout_s);
  s.count("pool_size", e.pool_size);
  try {
    e.validate();
  } catch (const Error& err) {
    invalid("executor", err.detail());
  }
}

void parse_inference(const Json& j, const fs::path& base, InferenceConfig& inf) {
  reject_unknown_keys(j, {"window", "overlap", "sigma_scale", "batch_size", "workers", "inputs"}, "inference");
  const Section s{j, "inference"};
  Shape window;
  if (s.list("window", [&](const Json& v, const std::string& where) {
        if (!v.is_number_integer() || v.get<long long>() < 1) invalid(where, "expected an integer >= 1");
        window.push_back(v.get<std::size_t>());
      }))
    inf.tiling.window = window;
  s.number("overlap", inf.tiling.overlap);
  s.number("sigma_scale", inf.tiling.sigma_scale);
  s.count("batch_size", inf.tiling.batch_size);
  s.count("workers", inf.tiling.workers);
  s.list("inputs", [&](const Json& v, const std::string& where) { inf.inputs.push_back(resolve(base, as_string(v, where))); });
  inf.tiling.validate();
  for (std::size_t i = 0; i < inf.inputs.size(); ++i)
    if (!fs::exists(inf.inputs[i]))
      invalid("inference.inputs[" + std::to_string(i) + "]", "'" + inf.inputs[i].string() + "' does not exist");
}

void parse_eval(const Json& j, const fs::path& base, EvalConfig& ev) {
  reject_unknown_keys(j, {"metrics", "threshold", "data_range", "prediction_dir", "workers"}, "eval");
  const Section s{j, "eval"};
  std::vector<Metric> metrics;
  if (s.list("metrics", [&](const Json& v, const std::string& where) {
        try {
          metrics.push_back(parse_metric(as_string(v, where)));
        } catch (const Error& e) {
          if (e.code() != Errc::ValidationError) throw;
          invalid(where, e.detail());
        }
      }))
    ev.metrics = metrics;
  if (ev.metrics.empty()) invalid("eval.metrics", "needs at least one metric");
  s.number("threshold", ev.threshold);
  double r;
  if (s.number("data_range", r)) {
    if (!(r > 0.0)) invalid("eval.data_range", "must be > 0");
    ev.data_range = r;
  }
  for (Metric m : ev.metrics)
    if (m == Metric::Ssim && !ev.data_range) invalid("eval.data_range", "required when eval.metrics includes ssim");
  std::string t;
  if (s.text("prediction_dir", t)) ev.prediction_dir = resolve(base, t);
  s.count("workers", ev.workers);
  if (ev.workers < 1) invalid("eval.workers", "must be >= 1");
}

void parse_output(const Json& j, const fs::path& base, OutputConfig& out) {
  reject_unknown_keys(j, {"dir", "overwrite"}, "output");
  const Section s{j, "output"};
  std::string t;
  if (s.text("dir", t)) out.dir = t;
  out.dir = resolve(base, out.dir.string());
  s.flag("overwrite", out.overwrite);
}

PipelineConfig config_from_json(const Json& root, const fs::path& base) {
  if (!root.is_object()) throw Error(Errc::ValidationError, "config: top level must be a mapping");
  reject_unknown_keys(root, {"data", "preprocess", "executor", "inference", "eval", "output"}, "");
  const Json empty = Json::object();
  auto section = [&](const char* name) -> const Json& {
    auto it = root.find(name);
    if (it == root.end() || it->is_null()) return empty;
    if (!it->is_object()) invalid(name, "expected a mapping");
    return *it;
  };

  PipelineConfig c;
  parse_data(section("data"), base, c.data);
  if (!c.data.cache_dir) {
    if (const char* env = std::getenv("MMVPIPE_CACHE_DIR"); env && *env)
      c.data.cache_dir = fs::absolute(env).lexically_normal();
  }
  if (auto it = root.find("preprocess"); it != root.end() && !it->is_null()) {
    if (!it->is_array()) invalid("preprocess", "expected a list of steps");
    for (std::size_t i = 0; i < it->size(); ++i)
      c.preprocess.push_back(transform_from_json((*it)[i], "preprocess[" + std::to_string(i) + "]"));
  }
  parse_executor(section("executor"), base, c.executor);
  parse_inference(section("inference"), base, c.inference);
  parse_eval(section("eval"), base, c.eval);
  parse_output(section("output"), base, c.output);
  return c;
}

Json optional_path(const std::optional<fs::path>& p) { return p ? Json(p->string()) : Json(nullptr); }

}  // namespace

fs::path PipelineConfig::manifest_path() const { return data.manifest.value_or(output.dir / "manifest.json"); }

fs::path PipelineConfig::prediction_dir() const { return eval.prediction_dir.value_or(output.dir); }

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir, const std::vector<std::string>& overrides) {
  Json root = parse_yaml(text, "config");
  if (root.is_null()) root = Json::object();
  for (const auto& o : overrides) apply_override(root, o);
  return config_from_json(root, fs::absolute(base_dir).lexically_normal());
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw Error(Errc::ParseError, "cannot read config: " + e.detail());
  }
  return parse_config(text, fs::absolute(path).parent_path(), overrides);
}

std::string config_to_json(const PipelineConfig& c) {
  Json roots = Json::array();
  for (const auto& r : c.data.roots) roots.push_back(r.string());
  Json data{{"mode", std::string(load_mode_name(c.data.mode))},
            {"roots", roots},
            {"manifest", optional_path(c.data.manifest)},
            {"val_ratio", c.data.val_ratio ? Json(*c.data.val_ratio) : Json(nullptr)},
            {"split_seed", c.data.split_seed},
            {"cache_dir", optional_path(c.data.cache_dir)},
            {"cache_workers", c.data.cache_workers},
            {"epoch_fraction", c.data.epoch_fraction},
            {"reload_every", c.data.reload_every},
            {"source_dir", c.data.layout.source_dir},
            {"target_dir", c.data.layout.target_dir},
            {"costmap_dir", c.data.layout.costmap_dir},
            {"source_suffix", c.data.layout.source_suffix},
            {"target_suffix", c.data.layout.target_suffix},
            {"costmap_suffix", c.data.layout.costmap_suffix}};

  Json preprocess = Json::array();
  for (const auto& step : c.preprocess) preprocess.push_back(transform_to_json(step));

  const ExecutorSpec& e = c.executor;
  Json executor{{"kind", std::string(executor_kind_name(e.kind))},
                {"spatial_rank", e.spatial_rank},
                {"in_channels", e.in_channels},
                {"out_channels", e.out_channels},
                {"sigma", e.sigma},
                {"gain", e.gain},
                {"bias", e.bias},
                {"threshold", e.threshold},
                {"command", e.command},
                {"timeout_s", e.timeout_s},
                {"pool_size", e.pool_size}};

  Json inputs = Json::array();
  for (const auto& p : c.inference.inputs) inputs.push_back(p.string());
  const TilingParams& t = c.inference.tiling;
  Json inference{{"window", t.window},         {"overlap", t.overlap}, {"sigma_scale", t.sigma_scale},
                 {"batch_size", t.batch_size}, {"workers", t.workers}, {"inputs", inputs}};

  Json metrics = Json::array();
  for (Metric m : c.eval.metrics) metrics.push_back(std::string(metric_name(m)));
  Json eval{{"metrics", metrics},
            {"threshold", c.eval.threshold},
            {"data_range", c.eval.data_range ? Json(*c.eval.data_range) : Json(nullptr)},
            {"prediction_dir", optional_path(c.eval.prediction_dir)},
            {"workers", c.eval.workers}};

  Json output{{"dir", c.output.dir.string()}, {"overwrite", c.output.overwrite}};

  return dump_json(Json{{"data", data},
                        {"preprocess", preprocess},
                        {"executor", executor},
                        {"inference", inference},
                        {"eval", eval},
                        {"output", output}});
}

}  // namespace mmv
