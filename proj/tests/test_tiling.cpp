#include <doctest.h>

#include <set>

#include "mmv/tiling.hpp"
#include "support.hpp"

using namespace mmv;

namespace {

ExecutorSpec spec_of(ExecutorKind kind, int rank, std::size_t channels = 1) {
  ExecutorSpec s;
  s.kind = kind;
  s.spatial_rank = rank;
  s.in_channels = s.out_channels = channels;
  return s;
}

Image tile(const Image& img, Executor& ex, const Shape& window, double overlap, double sigma_scale = 0.125,
           SlidingOptions opts = {}) {
  const Shape spatial = img.spatial_shape();
  return run_sliding(img, ex, plan_windows(spatial, window, overlap), gaussian_importance(window, sigma_scale), opts);
}

/// Records how many windows each call carried.
class CountingExecutor final : public Executor {
 public:
  explicit CountingExecutor(ExecutorSpec s, std::size_t cap) : spec_(std::move(s)), cap_(cap) {}
  const ExecutorSpec& spec() const override { return spec_; }
  std::size_t max_batch() const override { return cap_; }
  Image run(const Image& batch, std::size_t) override {
    check_batch(spec_, batch);
    sizes.push_back(batch.shape()[0]);
    return batch;
  }
  std::vector<std::size_t> sizes;

 private:
  ExecutorSpec spec_;
  std::size_t cap_;
};

class FailingExecutor final : public Executor {
 public:
  explicit FailingExecutor(ExecutorSpec s) : spec_(std::move(s)) {}
  const ExecutorSpec& spec() const override { return spec_; }
  Image run(const Image&, std::size_t) override { throw std::runtime_error("boom"); }

 private:
  ExecutorSpec spec_;
};

}  // namespace

TEST_SUITE("tiling") {
  TEST_CASE("window offsets") {
    const TilingPlan p = plan_windows({10}, {4}, 0.25);
    std::vector<std::size_t> offs;
    for (const auto& w : p.windows) offs.push_back(w.offset[0]);
    CHECK(offs == std::vector<std::size_t>{0, 3, 6});
    CHECK(window_stride(10, 0.9) == 1);
    CHECK(window_stride(4, 0.75) == 1);
    CHECK(window_stride(4, 0.0) == 4);

    const TilingPlan small = plan_windows({3, 40}, {8, 16}, 0.5);
    CHECK(small.padded_shape == Shape{8, 40});
    CHECK(small.windows.size() == 4);
    CHECK(small.windows.back().offset == Shape{0, 24});
  }

  TEST_CASE("windows cover every pixel and stay inside the padded shape") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t r = 2 + std::size_t(trial % 2);
      Shape shape(r), window(r);
      for (std::size_t a = 0; a < r; ++a) {
        shape[a] = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        window[a] = std::uniform_int_distribution<std::size_t>(1, 24)(rng);
      }
      const double overlap = std::uniform_real_distribution<double>(0.0, 0.75)(rng);
      const TilingPlan p = plan_windows(shape, window, overlap);
      for (std::size_t a = 0; a < r; ++a) {
        std::vector<bool> hit(p.padded_shape[a], false);
        std::set<std::size_t> starts;
        for (const auto& w : p.windows) starts.insert(w.offset[a]);
        for (std::size_t s : starts) {
          REQUIRE(s + window[a] <= p.padded_shape[a]);
          for (std::size_t i = 0; i < window[a]; ++i) hit[s + i] = true;
        }
        CHECK(std::all_of(hit.begin(), hit.end(), [](bool h) { return h; }));
      }
    }
  }

  TEST_CASE("window count does not fall as overlap grows") {
    std::size_t prev = 0;
    for (double o : {0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9}) {
      const std::size_t n = plan_windows({50, 37}, {16, 16}, o).windows.size();
      CHECK(n >= prev);
      prev = n;
    }
  }

  TEST_CASE("importance map") {
    const ImportanceMap m = gaussian_importance({5, 5}, 0.125);
    // sigma 0.625; the border pixel sits 2 from the center on one axis.
    CHECK(m.weights.at({0, 2}) == doctest::Approx(std::exp(-4.0 / (2 * 0.625 * 0.625))).epsilon(1e-6));
    CHECK(m.weights.at({2, 2}) == 1.0f);
    const double edge = std::exp(-4.0 / (2 * 0.625 * 0.625));
    CHECK(m.weights.at({0, 0}) == doctest::Approx(edge * edge).epsilon(1e-6));
    const ImportanceMap sharp = gaussian_importance({9, 9}, 0.05);
    CHECK(sharp.weights.at({0, 4}) == doctest::Approx(kImportanceFloor));
    CHECK(sharp.weights.at({0, 0}) == doctest::Approx(kImportanceFloor * kImportanceFloor));
    const ImportanceMap one = gaussian_importance({1, 1});
    CHECK(one.weights.data()[0] == 1.0f);
    const ImportanceMap even = gaussian_importance({4, 6, 6}, 0.25);
    CHECK(even.weights.at({1, 2, 2}) == even.weights.at({2, 3, 3}));
    for (float w : even.weights.data()) CHECK(w >= kImportanceFloor * kImportanceFloor * kImportanceFloor * 0.999);
    CHECK_THROWS_AS(gaussian_importance({4, 4}, 0.0), Error);
  }

  TEST_CASE("identity reproduces the input") {
    std::mt19937_64 rng(32);
    auto ex2 = make_executor(spec_of(ExecutorKind::Identity, 2));
    auto ex3 = make_executor(spec_of(ExecutorKind::Identity, 3, 2));
    for (int trial = 0; trial < 30; ++trial) {
      const Image a = mmvtest::random_image({Axis::Y, Axis::X}, {std::size_t(5 + trial), std::size_t(40 - trial)}, rng);
      const Image out = tile(a, *ex2, {16, 12}, 0.05 * (trial % 15), 0.05 + 0.015 * trial);
      CHECK(out.axes() == a.axes());
      CHECK(mmvtest::max_abs_diff(out, a) <= 1e-5);
    }
    const Image b = mmvtest::random_image({Axis::C, Axis::Z, Axis::Y, Axis::X}, {2, 7, 20, 18}, rng);
    const Image out = tile(b, *ex3, {4, 8, 8}, 0.5, 0.125, {3, 2});
    CHECK(out.shape() == b.shape());
    CHECK(mmvtest::max_abs_diff(out, b) <= 1e-5);
  }

  TEST_CASE("affine output stays affine") {
    ExecutorSpec s = spec_of(ExecutorKind::Affine, 2);
    s.bias = 1.0;
    auto ex = make_executor(s);
    const Image c({Axis::Y, Axis::X}, {33, 21}, std::vector<float>(33 * 21, 3.0f));
    const Image out = tile(c, *ex, {8, 8}, 0.25);
    for (float v : out.data()) CHECK(v == doctest::Approx(4.0).epsilon(1e-6));
  }

  TEST_CASE("tiled blur matches a whole-image blur away from the border") {
    std::mt19937_64 rng(33);
    ExecutorSpec s = spec_of(ExecutorKind::Blur, 2);
    auto ex = make_executor(s);
    const Shape shape{64, 64};
    const Image img = mmvtest::random_image({Axis::Y, Axis::X}, shape, rng);
    const Image whole = gaussian_blur(img, {1.0});
    const Image wide = tile(img, *ex, {24, 24}, 0.5), narrow = tile(img, *ex, {24, 24}, 0.25);

    // pixels within half the blur radius of a window edge in the 0.25 plan
    const std::size_t half = gaussian_kernel_1d(1.0).size() / 4;
    std::vector<bool> near_seam(shape[0] * shape[1], false);
    for (const Roi& w : plan_windows(shape, {24, 24}, 0.25).windows)
      for (std::size_t y = 0; y < shape[0]; ++y)
        for (std::size_t x = 0; x < shape[1]; ++x) {
          auto close = [&](std::size_t p, std::size_t lo, std::size_t hi) {
            return (p + half >= lo && p < lo + half) || (p + half >= hi && p < hi + half);
          };
          const bool iny = y + half >= w.offset[0] && y < w.offset[0] + w.size[0] + half;
          const bool inx = x + half >= w.offset[1] && x < w.offset[1] + w.size[1] + half;
          if ((iny && close(x, w.offset[1], w.offset[1] + w.size[1])) ||
              (inx && close(y, w.offset[0], w.offset[0] + w.size[0])))
            near_seam[y * shape[1] + x] = true;
        }

    double wide_err = 0.0, narrow_err = 0.0, pair_err = 0.0, narrow_all = 0.0;
    for (std::size_t y = 4; y + 4 < shape[0]; ++y)
      for (std::size_t x = 4; x + 4 < shape[1]; ++x) {
        const double want = whole.at({y, x});
        wide_err = std::max(wide_err, std::abs(wide.at({y, x}) - want));
        narrow_all = std::max(narrow_all, std::abs(narrow.at({y, x}) - want));
        if (near_seam[y * shape[1] + x]) continue;
        narrow_err = std::max(narrow_err, std::abs(narrow.at({y, x}) - want));
        pair_err = std::max(pair_err, double(std::abs(narrow.at({y, x}) - wide.at({y, x}))));
      }
    CHECK(wide_err < 2e-2);
    CHECK(narrow_err < 2e-2);
    CHECK(pair_err < 2e-2);
    CHECK(narrow_all < 2e-2);
    CHECK(wide_err < narrow_all);
  }

  TEST_CASE("worker count and batch size do not change the result beyond rounding") {
    std::mt19937_64 rng(34);
    ExecutorSpec s = spec_of(ExecutorKind::Blur, 2);
    auto ex = make_executor(s);
    const Image img = mmvtest::random_image({Axis::Y, Axis::X}, {50, 50}, rng);
    const Image one = tile(img, *ex, {16, 16}, 0.5, 0.125, {1, 1});
    const Image many = tile(img, *ex, {16, 16}, 0.5, 0.125, {3, 4});
    CHECK(mmvtest::max_abs_diff(one, many) <= 1e-5);
  }

  TEST_CASE("batches respect the executor's limit") {
    CountingExecutor ex(spec_of(ExecutorKind::Identity, 2), 3);
    const Image img({Axis::Y, Axis::X}, {20, 20});
    SlidingStats stats;
    const TilingPlan plan = plan_windows({20, 20}, {8, 8}, 0.0);
    (void)run_sliding(img, ex, plan, gaussian_importance({8, 8}), {8, 1}, &stats);
    CHECK(stats.windows == 9);
    CHECK(stats.executor_calls == 3);
    CHECK(ex.sizes == std::vector<std::size_t>{3, 3, 3});
  }

  TEST_CASE("executor failures carry the window index") {
    FailingExecutor ex(spec_of(ExecutorKind::Identity, 2));
    const Image img({Axis::Y, Axis::X}, {20, 20});
    try {
      (void)tile(img, ex, {8, 8}, 0.0);
      FAIL("expected ExecutorFailure");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ExecutorFailure);
      CHECK(e.index() == std::optional<std::size_t>(0));
    }
  }

  TEST_CASE("outer axes") {
    std::mt19937_64 rng(35);
    auto id2 = make_executor(spec_of(ExecutorKind::Identity, 2));
    TilingParams params;
    params.window = {8};
    params.overlap = 0.25;

    const Image t3 = mmvtest::random_image({Axis::T, Axis::Y, Axis::X}, {3, 13, 11}, rng);
    CHECK(mmvtest::max_abs_diff(run_over_outer_axes(t3, *id2, params), t3) <= 1e-5);

    ExecutorSpec bs = spec_of(ExecutorKind::Blur, 2);
    auto blur2 = make_executor(bs);
    const Image zyx = mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {4, 17, 15}, rng);
    SlidingStats stats;
    const Image out = run_over_outer_axes(zyx, *blur2, params, &stats);
    REQUIRE(out.shape() == zyx.shape());
    for (std::size_t z = 0; z < 4; ++z) {
      const Image plane = tile(slice(zyx, Axis::Z, z), *blur2, {8, 8}, 0.25);
      CHECK(slice(out, Axis::Z, z) == plane);
    }
    CHECK(stats.windows == 4 * 9);

    auto id3 = make_executor(spec_of(ExecutorKind::Identity, 3));
    params.window = {1, 8, 8};
    const Image yx = mmvtest::random_image({Axis::Y, Axis::X}, {9, 9}, rng);
    CHECK(mmvtest::max_abs_diff(run_over_outer_axes(yx, *id3, params), yx) <= 1e-5);

    const Image two_channel = mmvtest::random_image({Axis::C, Axis::Y, Axis::X}, {2, 9, 9}, rng);
    params.window = {8};
    try {
      (void)run_over_outer_axes(two_channel, *id2, params);
      FAIL("expected ChannelMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ChannelMismatch);
    }
  }

  TEST_CASE("parameter validation") {
    TilingParams p;
    p.overlap = 1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p.overlap = 0.5;
    p.window = {};
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK_THROWS_AS(plan_windows({10, 10}, {4}, 0.1), Error);
  }
}
