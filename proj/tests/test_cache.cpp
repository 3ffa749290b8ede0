#include <doctest.h>

#include "mmv/cache.hpp"
#include "mmv/io.hpp"
#include "support.hpp"

using namespace mmv;
namespace fs = std::filesystem;

namespace {

Manifest make_dataset(const fs::path& root, std::size_t n, std::mt19937_64& rng, bool with_costmap = false) {
  Manifest m;
  fs::create_directories(root / "src");
  fs::create_directories(root / "tgt");
  fs::create_directories(root / "cm");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "r" + std::to_string(1000 + i);
    SampleRecord r{id, root / "src" / (id + ".ndt"), root / "tgt" / (id + ".ndt"), std::nullopt, Split::Unassigned};
    write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {3, 4, 4}, rng, 0, 100), r.source);
    write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {3, 4, 4}, rng), r.target);
    if (with_costmap) {
      r.costmap = root / "cm" / (id + ".ndt");
      write_ndt(Image({Axis::Z, Axis::Y, Axis::X}, {3, 4, 4}, std::vector<float>(48, 1.0f)), *r.costmap);
    }
    m.records.push_back(r);
  }
  return m;
}

std::vector<TransformStep> percentile_steps() {
  TransformStep norm{NormSpec{}, {Role::Source}};
  TransformStep axes{EnsureAxesOp{{Axis::C}}, {Role::Source, Role::Target, Role::Costmap}};
  return {norm, axes};
}

}  // namespace

TEST_SUITE("cache") {
  TEST_CASE("second build writes nothing") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(1);
    const Manifest m = make_dataset(d / "data", 6, rng, true);
    const CacheBuild first = build_cache(m, percentile_steps(), d / "cache");
    CHECK(first.stats.rebuilt == 6);
    CHECK(first.stats.blobs_written == 18);
    const CacheBuild second = build_cache(m, percentile_steps(), d / "cache");
    CHECK(second.stats.rebuilt == 0);
    CHECK(second.stats.blobs_written == 0);
    CHECK(second.index == first.index);
    CHECK(load_cache_index(d / "cache") == first.index);
  }

  TEST_CASE("changing one source rebuilds exactly that record") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(2);
    const Manifest m = make_dataset(d / "data", 5, rng);
    const CacheBuild first = build_cache(m, percentile_steps(), d / "cache", 3);
    write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {3, 4, 4}, rng), m.records[2].source);
    const CacheBuild second = build_cache(m, percentile_steps(), d / "cache", 3);
    CHECK(second.stats.rebuilt == 1);
    CHECK(second.stats.blobs_written == 2);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& id = m.records[i].id;
      CHECK((first.index.entries.at(id) == second.index.entries.at(id)) == (i != 2));
    }
  }

  TEST_CASE("changing the transforms rebuilds everything") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(3);
    const Manifest m = make_dataset(d / "data", 4, rng);
    (void)build_cache(m, percentile_steps(), d / "cache");
    auto steps = percentile_steps();
    std::get<NormSpec>(steps[0].op).p_hi = 99.0;
    CHECK(build_cache(m, steps, d / "cache").stats.rebuilt == 4);
  }

  TEST_CASE("removed blob is rebuilt") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(4);
    const Manifest m = make_dataset(d / "data", 3, rng);
    const CacheBuild first = build_cache(m, percentile_steps(), d / "cache");
    fs::remove(d / "cache" / first.index.entries.at(m.records[0].id).blobs.at("target"));
    CHECK(build_cache(m, percentile_steps(), d / "cache").stats.rebuilt == 1);
  }

  TEST_CASE("cached blobs equal a fresh transform") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(5);
    const Manifest m = make_dataset(d / "data", 3, rng, true);
    const auto steps = percentile_steps();
    const CacheBuild b = build_cache(m, steps, d / "cache");
    for (const auto& r : m.records) {
      const CacheEntry& e = b.index.entries.at(r.id);
      const Image fresh = apply_transforms(read_image(r.source), steps, Role::Source);
      CHECK(load_cached(d / "cache", e, Role::Source) == fresh);
      CHECK(load_cached(d / "cache", e, Role::Target) == apply_transforms(read_image(r.target), steps, Role::Target));
      const std::string& rel = e.blobs.at("source");
      CHECK(rel.substr(0, 2) == rel.substr(3, 2));
    }
  }

  TEST_CASE("index is independent of worker count") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(6);
    const Manifest m = make_dataset(d / "data", 12, rng);
    (void)build_cache(m, percentile_steps(), d / "c1", 1);
    (void)build_cache(m, percentile_steps(), d / "c8", 8);
    CHECK(mmvtest::read_bytes(d / "c1" / "index.json") == mmvtest::read_bytes(d / "c8" / "index.json"));
  }

  TEST_CASE("key covers version, transforms and content") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(7);
    const Manifest m = make_dataset(d / "data", 2, rng);
    const std::string k0 = record_content_key(m.records[0], "[]");
    CHECK(k0.size() == 64);
    CHECK(record_content_key(m.records[0], "[]") == k0);
    CHECK(record_content_key(m.records[0], "[{}]") != k0);
    CHECK(record_content_key(m.records[1], "[]") != k0);
  }

  TEST_CASE("a failing transform names the sample") {
    mmvtest::TempDir d;
    std::mt19937_64 rng(8);
    Manifest m = make_dataset(d / "data", 2, rng);
    write_ndt(Image({Axis::Y, Axis::X}, {2, 2}), m.records[1].source);
    const std::vector<TransformStep> steps{TransformStep{NormSpec{NormKind::Center}, {Role::Source}}};
    try {
      (void)build_cache(m, steps, d / "cache");
      FAIL("expected TransformError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::TransformError);
      CHECK(std::string(e.what()).find(m.records[1].id) != std::string::npos);
    }
  }
}
