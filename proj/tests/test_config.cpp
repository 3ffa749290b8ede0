#include <doctest.h>

#include <cstdlib>

#include "mmv/config.hpp"
#include "support.hpp"

using namespace mmv;
namespace fs = std::filesystem;

namespace {

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("no error raised");
  return Error(Errc::InvalidArgument, "");
}

const char* kBase = R"(
data:
  mode: paired-folders
  roots: [data]
  val_ratio: 0.2
preprocess:
  - op: percentile_norm
    p_hi: 99.0
  - op: ensure_axes
    axes: C
    apply_to: [source, target]
executor:
  kind: blur
  sigma: [1.5]
inference:
  window: [32, 32]
  overlap: 0.25
eval:
  metrics: [pearson, ssim]
  data_range: 2.0
output:
  dir: results
)";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults, relative paths and overrides") {
    mmvtest::TempDir d;
    fs::create_directories(d / "data");
    const PipelineConfig c = parse_config(kBase, d.path());
    CHECK(c.data.roots == std::vector<fs::path>{d / "data"});
    CHECK(c.output.dir == d / "results");
    CHECK(c.manifest_path() == d / "results" / "manifest.json");
    CHECK(c.prediction_dir() == d / "results");
    CHECK(c.executor.kind == ExecutorKind::Blur);
    CHECK(c.executor.sigma == std::vector<double>{1.5});
    CHECK(c.inference.tiling.window == Shape{32, 32});
    CHECK(c.inference.tiling.sigma_scale == 0.125);
    CHECK(c.data.epoch_fraction == 0.1);
    CHECK(c.data.reload_every == 5);
    REQUIRE(c.preprocess.size() == 2);
    CHECK(std::get<NormSpec>(c.preprocess[0].op).p_hi == 99.0);
    CHECK(c.preprocess[1].applies_to(Role::Target));
    CHECK_FALSE(c.preprocess[1].applies_to(Role::Costmap));

    const PipelineConfig o = parse_config(kBase, d.path(),
                                          {"inference.overlap=0.5", "inference.overlap=0.6", "preprocess.0.p_hi=98",
                                           "executor.sigma=[1, 2]", "output.overwrite=true"});
    CHECK(o.inference.tiling.overlap == 0.6);
    CHECK(std::get<NormSpec>(o.preprocess[0].op).p_hi == 98.0);
    CHECK(o.executor.sigma == std::vector<double>{1.0, 2.0});
    CHECK(o.output.overwrite);
  }

  TEST_CASE("misspelled keys suggest the nearest name") {
    mmvtest::TempDir d;
    fs::create_directories(d / "data");
    const Error e = error_of([&] { (void)parse_config(kBase, d.path(), {"inference.overlpa=0.3"}); });
    CHECK(e.code() == Errc::UnknownKey);
    CHECK(std::string(e.what()).find("did you mean 'inference.overlap'") != std::string::npos);
    CHECK(error_of([&] { (void)parse_config("inferrence: {overlap: 0.2}\n", d.path()); }).code() == Errc::UnknownKey);
  }

  TEST_CASE("validation errors name the field") {
    mmvtest::TempDir d;
    fs::create_directories(d / "data");
    const Error e = error_of([&] { (void)parse_config(kBase, d.path(), {"inference.overlap=1.5"}); });
    CHECK(e.code() == Errc::ValidationError);
    CHECK(std::string(e.what()).find("inference.overlap") != std::string::npos);
    CHECK(error_of([&] { (void)parse_config(kBase, d.path(), {"eval.data_range=null"}); }).code() == Errc::ValidationError);
    CHECK(error_of([&] { (void)parse_config(kBase, d.path(), {"data.roots=[nope]"}); }).code() == Errc::ValidationError);
    CHECK(error_of([&] { (void)parse_config(kBase, d.path(), {"inference.window='big'"}); }).code() == Errc::ValidationError);
    CHECK(error_of([&] { (void)parse_config(kBase, d.path(), {"executor.kind=unet"}); }).code() == Errc::ValidationError);
  }

  TEST_CASE("parse errors carry the line") {
    mmvtest::TempDir d;
    const Error e = error_of([&] { (void)parse_config("data:\n  mode: [csv\noutput: {}\n", d.path()); });
    CHECK(e.code() == Errc::ParseError);
    CHECK(e.index().has_value());
    const Error dup = error_of([&] { (void)parse_config("output:\n  dir: a\n  dir: b\n", d.path()); });
    CHECK(dup.code() == Errc::ParseError);
    CHECK(dup.index() == std::optional<std::size_t>(3));
    CHECK(error_of([&] { (void)parse_config("output: !!python/object {}\n", d.path()); }).code() == Errc::ParseError);
  }

  TEST_CASE("quoted scalars stay strings") {
    mmvtest::TempDir d;
    CHECK(parse_config("output:\n  dir: '123'\n", d.path()).output.dir == d / "123");
    CHECK(error_of([&] { (void)parse_config("output:\n  overwrite: 'true'\n", d.path()); }).code() == Errc::ValidationError);
  }

  TEST_CASE("cache dir falls back to the environment") {
    mmvtest::TempDir d;
    ::setenv("MMVPIPE_CACHE_DIR", (d / "envcache").c_str(), 1);
    CHECK(parse_config("{}", d.path()).data.cache_dir == d / "envcache");
    CHECK(parse_config("data: {cache_dir: mine}\n", d.path()).data.cache_dir == d / "mine");
    ::unsetenv("MMVPIPE_CACHE_DIR");
    CHECK_FALSE(parse_config("{}", d.path()).data.cache_dir.has_value());
  }

  TEST_CASE("effective config reloads to the same config") {
    mmvtest::TempDir d;
    fs::create_directories(d / "data");
    mmvtest::write_bytes(d / "pipe.yaml", kBase);
    const PipelineConfig c = load_config(d / "pipe.yaml", {"executor.gain=3"});
    const std::string echoed = config_to_json(c);
    mmvtest::write_bytes(d / "echo.json", echoed);
    const PipelineConfig again = load_config(d / "echo.json");
    CHECK(config_to_json(again) == echoed);
    CHECK(echoed.find("\"sigma_scale\"") != std::string::npos);
    CHECK(error_of([&] { (void)load_config(d / "absent.yaml"); }).code() == Errc::ParseError);
  }
}
