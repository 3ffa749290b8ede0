// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "cli_harness.hpp"
#include "mmv/cache.hpp"
#include "mmv/io.hpp"
#include "mmv/manifest.hpp"
#include "mmv/metrics.hpp"
#include "mmv/normalize.hpp"
#include "mmv/sampling.hpp"
#include "mmv/stain.hpp"
#include "mmv/tiling.hpp"
#include "synthetic.hpp"

using namespace mmv;
using mmvtest::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail.str("");
      detail << what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double draw(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

ExecutorSpec builtin(ExecutorKind kind, int rank, std::size_t channels = 1) {
  ExecutorSpec s;
  s.kind = kind;
  s.spatial_rank = rank;
  s.in_channels = s.out_channels = channels;
  return s;
}

template <typename Fn>
std::optional<Errc> error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- tiling

void stitching_identity(Outcome& o) {
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst = 0.0;
  const int cases = 220;
  for (int i = 0; i < cases; ++i) {
    const int rank = i % 3 == 0 ? 3 : 2;
    const std::size_t channels = draw(rng, std::size_t(1), std::size_t(2));
    const std::size_t cap = rank == 3 ? 40 : 64;
    Shape shape, window;
    for (int a = 0; a < rank; ++a) {
      shape.push_back(draw(rng, std::size_t(1), cap));
      window.push_back(draw(rng, std::size_t(1), rank == 3 ? std::size_t(24) : std::size_t(48)));
    }
    const double overlap = draw(rng, 0.0, 0.75), sigma_scale = draw(rng, 0.05, 0.5);
    AxisList axes{Axis::C};
    if (rank == 3) axes.push_back(Axis::Z);
    axes.push_back(Axis::Y);
    axes.push_back(Axis::X);
    Shape full{channels};
    full.insert(full.end(), shape.begin(), shape.end());
    const Image img = mmvtest::random_image(axes, full, rng, -1.0f, 1.0f);
    auto ex = make_executor(builtin(ExecutorKind::Identity, rank, channels));
    const Image out = run_sliding(img, *ex, plan_windows(shape, window, overlap), gaussian_importance(window, sigma_scale),
                                  {draw(rng, std::size_t(1), std::size_t(8)), 1});
    const double err = mmvtest::max_abs_diff(out, img);
    worst = std::max(worst, err);
    o.require(err <= 1e-5, "case " + std::to_string(i) + " shape " + shape_string(shape) + " window " +
                               shape_string(window) + " error " + std::to_string(err));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  if (o.pass) o.detail << cases << " cases, max abs error " << worst << ", " << secs << " s";
}

void blur_seamlessness(Outcome& o) {
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const bool three = i % 2 == 1;
    const double overlap = draw(rng, 0.25, 0.5);
    Shape shape, window;
    if (three) {
      shape = {draw(rng, std::size_t(16), std::size_t(30)), draw(rng, std::size_t(20), std::size_t(40)),
               draw(rng, std::size_t(20), std::size_t(40))};
      window = {16, 16, 16};
    } else {
      shape = {draw(rng, std::size_t(40), std::size_t(90)), draw(rng, std::size_t(40), std::size_t(90))};
      const std::size_t w = draw(rng, std::size_t(24), std::size_t(32));
      window = {w, w};
    }
    const AxisList axes = three ? AxisList{Axis::Z, Axis::Y, Axis::X} : AxisList{Axis::Y, Axis::X};
    const Image img = mmvtest::random_image(axes, shape, rng);
    auto ex = make_executor(builtin(ExecutorKind::Blur, three ? 3 : 2));
    const Image tiled = run_sliding(img, *ex, plan_windows(shape, window, overlap), gaussian_importance(window));
    const Image whole = gaussian_blur(img, {1.0});
    const std::size_t band = gaussian_kernel_1d(1.0).size() / 2;
    Roi inner{Shape(shape.size(), band), shape};
    for (auto& s : inner.size) s -= 2 * band;
    const double err = mmvtest::max_abs_diff(crop(tiled, inner), crop(whole, inner));
    worst = std::max(worst, err);
    o.require(err <= 2e-2, "image " + std::to_string(i) + " " + shape_string(shape) + " error " + std::to_string(err));
  }
  if (o.pass) o.detail << "20 images, max interior error " << worst;
}

// ---------------------------------------------------------------- normalization

double sorted_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * double(v.size() - 1);
  const auto lo = std::size_t(rank);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - double(lo)) * (v[hi] - v[lo]);
}

std::vector<double> as_doubles(const Image& img) { return {img.data().begin(), img.data().end()}; }

std::vector<double> zscore_oracle(const Image& img, const std::vector<double>& stats_from) {
  double sum = 0.0;
  for (double v : stats_from) sum += v;
  const double mean = sum / double(stats_from.size());
  double ss = 0.0;
  for (double v : stats_from) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / double(stats_from.size()));
  std::vector<double> out;
  for (float v : img.data()) out.push_back((double(v) - mean) / sd);
  return out;
}

// Absolute error, relative once |want| exceeds 1 (outputs are f32).
double max_diff(const Image& got, const std::vector<double>& want) {
  double m = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    m = std::max(m, std::abs(double(got[i]) - want[i]) / std::max(1.0, std::abs(want[i])));
  return m;
}

void normalization_oracles(Outcome& o) {
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t z = i % 10 == 0 ? 1 : draw(rng, std::size_t(2), std::size_t(12));
    const Image img = mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {z, draw(rng, std::size_t(2), std::size_t(15)),
                                             draw(rng, std::size_t(2), std::size_t(15))},
                                            rng, -3.0f, 40.0f);
    const std::string where = "image " + std::to_string(i);

    NormSpec ps;
    ps.p_lo = draw(rng, 0.0, 10.0);
    ps.p_hi = draw(rng, 90.0, 100.0);
    const double lo = sorted_percentile(as_doubles(img), ps.p_lo), hi = sorted_percentile(as_doubles(img), ps.p_hi);
    std::vector<double> want;
    for (float v : img.data()) want.push_back(-1.0 + 2.0 * (std::clamp(double(v), lo, hi) - lo) / (hi - lo));
    double err = max_diff(percentile_norm(img, ps), want);

    err = std::max(err, max_diff(standard_norm(img), zscore_oracle(img, as_doubles(img))));

    const double fraction = draw(rng, 0.05, 1.0);
    const auto count = std::clamp<std::size_t>(std::size_t(std::llround(fraction * double(z))), 1, z);
    const Image chunk = crop(img, Roi{{(z - count) / 2, 0, 0}, {count, img.shape()[1], img.shape()[2]}});
    err = std::max(err, max_diff(center_norm(img, fraction), zscore_oracle(img, as_doubles(chunk))));
    err = std::max(err, mmvtest::max_abs_diff(center_norm(img, 1.0), standard_norm(img)));
    if (z == 1) err = std::max(err, mmvtest::max_abs_diff(center_norm(img, fraction), standard_norm(img)));
    worst = std::max(worst, err);
    o.require(err <= 1e-6, where + " error " + std::to_string(err));
  }

  const Image flat({Axis::Z, Axis::Y, Axis::X}, {3, 4, 4}, std::vector<float>(48, 5.0f));
  const Image mid = percentile_norm(flat);
  o.require(std::all_of(mid.data().begin(), mid.data().end(), [](float v) { return v == 0.0f; }),
            "constant image is not mapped to the midpoint");
  o.require(error_code([&] { (void)standard_norm(flat); }) == Errc::ZeroVariance, "constant standard_norm");
  o.require(error_code([&] { (void)center_norm(flat, 0.5); }) == Errc::ZeroVariance, "constant center_norm");
  if (o.pass) o.detail << "100 images, max error " << worst << "; constant and Z=1 cases hold";
}

// ---------------------------------------------------------------- stain

void macenko_recovery(Outcome& o) {
  std::mt19937_64 rng(1004);
  std::normal_distribution<double> jitter(0.0, 0.04);
  double worst_angle = 0.0, worst_dist = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Vector3d h(0.65, 0.70, 0.29), e(0.22, 0.92, 0.32), h2(0.49, 0.77, 0.41), e2(0.26, 0.86, 0.44);
    for (int k = 0; k < 3; ++k) {
      h(k) = std::max(0.15, h(k) + jitter(rng));
      e(k) = std::max(0.15, e(k) + jitter(rng));
      h2(k) = std::max(0.15, h2(k) + jitter(rng));
      e2(k) = std::max(0.15, e2(k) + jitter(rng));
    }
    const StainMatrix a = mmvtest::stain_basis(h, e), b = mmvtest::stain_basis(h2, e2);
    const Eigen::Matrix2Xd conc = mmvtest::tissue_concentrations(64 * 64, rng);
    const Image ra = render_stains(conc, a, 255.0, 64, 64), rb = render_stains(conc, b, 255.0, 64, 64);
    const StainFit fit = macenko_fit(ra);
    const double angle = std::max(mmvtest::angle_between(fit.stains.col(0), a.col(0)),
                                  mmvtest::angle_between(fit.stains.col(1), a.col(1)));
    const double dist = mmvtest::mean_pixel_distance(macenko_normalize(ra), macenko_normalize(rb)) / 255.0;
    worst_angle = std::max(worst_angle, angle);
    worst_dist = std::max(worst_dist, dist);
    o.require(angle <= 1e-3, "trial " + std::to_string(trial) + " angular error " + std::to_string(angle));
    o.require(dist < 0.05, "trial " + std::to_string(trial) + " distance " + std::to_string(dist) + " of io");
  }
  if (o.pass) o.detail << "5 tissues, max angle " << worst_angle << " rad, max distance " << worst_dist * 100 << "% of io";
}

// ---------------------------------------------------------------- metrics

double pearson_oracle(const Image& a, const Image& b) {
  const double n = double(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - sa / n, db = b[i] - sb / n;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  return cov / std::sqrt(va * vb);
}

double ssim_oracle_2d(const Image& a, const Image& b, double range) {
  const std::size_t Y = a.shape()[0], X = a.shape()[1], w = 7;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2), n = double(w * w);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + w <= Y; ++y0)
    for (std::size_t x0 = 0; x0 + w <= X; ++x0) {
      double ma = 0, mb = 0;
      for (std::size_t y = y0; y < y0 + w; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) {
          ma += a[y * X + x];
          mb += b[y * X + x];
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t y = y0; y < y0 + w; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) {
          const double da = a[y * X + x] - ma, db = b[y * X + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov / n + c2) / ((ma * ma + mb * mb + c1) * (va / n + vb / n + c2));
      ++count;
    }
  return total / double(count);
}

void metric_oracles(Outcome& o) {
  std::mt19937_64 rng(1005);
  double p_err = 0, s_err = 0, rel_err = 0;
  for (int i = 0; i < 50; ++i) {
    const Image a = mmvtest::random_image({Axis::Y, Axis::X}, {draw(rng, std::size_t(7), std::size_t(30)), 19}, rng);
    Image b = mmvtest::random_image(a.axes(), a.shape(), rng);
    b.array() = b.array() * 0.5f + a.array();
    p_err = std::max(p_err, std::abs(pearson(a, b) - pearson_oracle(a, b)));
    s_err = std::max(s_err, std::abs(ssim(a, b, 1.5) - ssim_oracle_2d(a, b, 1.5)));
  }
  o.require(p_err <= 1e-9, "pearson error " + std::to_string(p_err));
  o.require(s_err <= 1e-6, "ssim error " + std::to_string(s_err));

  for (int i = 0; i < 200; ++i) {
    Image p({Axis::Y, Axis::X}, {16, 16}), g({Axis::Y, Axis::X}, {16, 16});
    std::bernoulli_distribution on_p(draw(rng, 0.0, 1.0)), on_g(draw(rng, 0.0, 1.0));
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = on_p(rng) ? 1.0f : 0.0f;
      g[k] = on_g(rng) ? 1.0f : 0.0f;
    }
    std::size_t inter = 0, sp = 0, sg = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      inter += p[k] * g[k] > 0;
      sp += p[k] > 0;
      sg += g[k] > 0;
    }
    const double dice_want = sp + sg == 0 ? 1.0 : 2.0 * double(inter) / double(sp + sg);
    const double j = iou(p, g);
    rel_err = std::max({rel_err, std::abs(dice_f1(p, g) - 2 * j / (1 + j)), std::abs(dice_f1(p, g) - dice_want)});
  }
  o.require(rel_err <= 1e-6, "dice/iou relation error " + std::to_string(rel_err));

  Image p({Axis::Y, Axis::X}, {8, 8}), g({Axis::Y, Axis::X}, {8, 8});
  for (std::size_t y = 2; y < 5; ++y)
    for (std::size_t x = 2; x < 5; ++x) {
      p.at({y, x}) = 1.0f;
      g.at({y, x + 1}) = 1.0f;
    }
  o.require(std::abs(dice_f1(p, g) - 2.0 / 3.0) < 1e-4 && std::abs(iou(p, g) - 0.5) < 1e-9, "shifted block example");
  const std::string line = make_report("pearson", {"a", "b", "c"}, {0.9, 0.8, 0.7}).line();
  o.require(line == "pearson: 0.800 ± 0.082 (n=3)", "report line '" + line + "'");
  if (o.pass) o.detail << "pearson " << p_err << ", ssim " << s_err << ", dice/iou " << rel_err << "; " << line;
}

// ---------------------------------------------------------------- data

void cache_scale(Outcome& o) {
  TempDir d;
  std::mt19937_64 rng(1006);
  const std::size_t n = 10000;
  Manifest m;
  fs::create_directories(d / "src");
  fs::create_directories(d / "tgt");
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%05zu", i);
    SampleRecord r{id, d / "src" / (std::string(id) + ".ndt"), d / "tgt" / (std::string(id) + ".ndt"), std::nullopt,
                   Split::Unassigned};
    write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {2, 4, 4}, rng, 0, 100), r.source);
    write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {2, 4, 4}, rng), r.target);
    m.records.push_back(std::move(r));
  }
  const std::vector<TransformStep> steps{TransformStep{NormSpec{}, {Role::Source}},
                                         TransformStep{EnsureAxesOp{{Axis::C}}, {Role::Source, Role::Target}}};
  auto t0 = Clock::now();
  const CacheBuild first = build_cache(m, steps, d / "c1", 1);
  const double build_s = seconds_since(t0);
  o.require(first.stats.rebuilt == n && first.stats.blobs_written == 2 * n, "first build incomplete");
  const CacheBuild again = build_cache(m, steps, d / "c1", 1);
  o.require(again.stats.blobs_written == 0, "rebuild wrote " + std::to_string(again.stats.blobs_written) + " blobs");

  write_ndt(mmvtest::random_image({Axis::Z, Axis::Y, Axis::X}, {2, 4, 4}, rng, 0, 100), m.records[4321].source);
  const CacheBuild touched = build_cache(m, steps, d / "c1", 1);
  std::size_t changed = 0;
  for (const auto& [id, e] : touched.index.entries) changed += !(first.index.entries.at(id) == e);
  o.require(touched.stats.rebuilt == 1 && changed == 1 && touched.stats.blobs_written == 2,
            "changing one source rebuilt " + std::to_string(touched.stats.rebuilt));

  (void)build_cache(m, steps, d / "c8", 8);
  (void)build_cache(m, steps, d / "c1b", 1);
  o.require(mmvtest::read_bytes(d / "c8" / "index.json") == mmvtest::read_bytes(d / "c1b" / "index.json"),
            "index differs between 1 and 8 workers");
  if (o.pass)
    o.detail << n << " samples built in " << build_s << " s; rebuild 0 blobs; 1 changed source -> 1 rebuilt; 1 vs 8 "
             << "workers byte-identical";
}

void epoch_coverage(Outcome& o) {
  std::size_t combos = 0;
  for (std::size_t n = 1; n <= 100; ++n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    for (int fi = 1; fi <= 10; ++fi) {
      const double f = fi / 10.0;
      const auto span = std::size_t(std::ceil(1.0 / f - 1e-9));
      for (std::size_t k : {1, 2, 5}) {
        for (std::uint64_t seed : {0ULL, 7ULL}) {
          ++combos;
          std::vector<std::vector<std::string>> blocks;
          for (std::size_t b = 0; b < 2 * span + 3; ++b) {
            blocks.push_back(epoch_subset(ids, f, k, b * k, seed));
            if (k > 1 && epoch_subset(ids, f, k, b * k + k - 1, seed) != blocks.back())
              o.require(false, "selection changes inside a block (N=" + std::to_string(n) + ")");
          }
          for (std::size_t start = 0; start + span <= blocks.size(); ++start) {
            std::set<std::string> seen;
            for (std::size_t b = start; b < start + span; ++b) seen.insert(blocks[b].begin(), blocks[b].end());
            if (seen.size() != n)
              o.require(false, "N=" + std::to_string(n) + " f=" + std::to_string(f) + " k=" + std::to_string(k) +
                                   " blocks from " + std::to_string(start) + " miss " + std::to_string(n - seen.size()));
          }
        }
      }
    }
  }
  if (o.pass) o.detail << combos << " (N, f, k, seed) combinations, every window of ceil(1/f) blocks covers all ids";
}

void costmap_sampling(Outcome& o) {
  std::mt19937_64 rng(1007);
  Image cost({Axis::Y, Axis::X}, {10, 10});
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 5; x < 10; ++x) cost.at({y, x}) = 1.0f;
  const Image src = mmvtest::random_image({Axis::Y, Axis::X}, {10, 10}, rng);

  std::set<std::pair<std::size_t, std::size_t>> valid, seen;
  for (std::size_t oy = 0; oy + 5 <= 10; ++oy)
    for (std::size_t ox = 0; ox + 5 <= 10; ++ox) {
      bool any = false;
      for (std::size_t y = oy; y < oy + 5; ++y)
        for (std::size_t x = ox; x < ox + 5; ++x) any |= cost.at({y, x}) > 0;
      if (any) valid.insert({oy, ox});
    }
  std::size_t zero = 0;
  for (int i = 0; i < 10000; ++i) {
    const PatchPair p = sample_patch(src, src, cost, {5, 5}, rng);
    double s = 0;
    for (float v : p.cost.data()) s += v;
    zero += s == 0;
    seen.insert({p.origin.offset[0], p.origin.offset[1]});
  }
  o.require(zero == 0, std::to_string(zero) + " zero-cost patches");
  o.require(seen == valid, "empirical offsets " + std::to_string(seen.size()) + " vs " + std::to_string(valid.size()) + " valid");
  const Image none({Axis::Y, Axis::X}, {10, 10});
  o.require(error_code([&] { (void)sample_patch(src, src, none, {5, 5}, rng); }) == Errc::AllExcluded,
            "all-zero cost map did not raise AllExcluded");
  if (o.pass) o.detail << "10000 draws, 0 zero-cost, " << seen.size() << " offsets == brute force; AllExcluded raised";
}

// ---------------------------------------------------------------- io

void ndt_round_trip(Outcome& o) {
  TempDir d;
  std::mt19937_64 rng(1008);
  const std::vector<AxisList> layouts{{Axis::Y, Axis::X},
                                      {Axis::C, Axis::Y, Axis::X},
                                      {Axis::Z, Axis::Y, Axis::X},
                                      {Axis::T, Axis::C, Axis::Z, Axis::Y, Axis::X}};
  std::size_t files = 0;
  for (int i = 0; i < 40; ++i) {
    const AxisList& axes = layouts[std::size_t(i) % layouts.size()];
    Shape shape;
    for (std::size_t a = 0; a < axes.size(); ++a) shape.push_back(draw(rng, std::size_t(1), std::size_t(6)));
    const fs::path p = d / ("img" + std::to_string(i) + ".ndt");
    Image img(axes, shape);
    std::uniform_int_distribution<std::uint32_t> bits;
    for (auto& v : img.data()) {
      std::uint32_t u = bits(rng);
      std::memcpy(&v, &u, 4);
    }
    img.data()[0] = std::numeric_limits<float>::quiet_NaN();
    write_ndt(img, p);
    const Image back = read_ndt(p);
    o.require(back.axes() == axes && back.shape() == shape &&
                  std::memcmp(back.data().data(), img.data().data(), img.size() * 4) == 0,
              "f32 round trip " + std::to_string(i) + " not bitwise");
    o.require(encode_ndt(back) == mmvtest::read_bytes(p), "re-encoded bytes differ for " + std::to_string(i));

    ImageU16 u16(axes, shape);
    for (auto& v : u16.data()) v = std::uint16_t(bits(rng));
    write_ndt(u16, d / "u16.ndt");
    const Image w = read_ndt(d / "u16.ndt");
    bool same = true;
    for (std::size_t k = 0; k < u16.size(); ++k) same &= w[k] == float(u16[k]);
    o.require(same, "u16 round trip " + std::to_string(i));
    files += 2;
  }

  const std::vector<std::pair<std::string, Errc>> malformed{
      {"bad_magic", Errc::BadMagic},         {"bad_version", Errc::UnsupportedVersion},
      {"bad_dtype", Errc::BadHeader},        {"bad_axis_order", Errc::BadHeader},
      {"bad_axis_label", Errc::BadHeader},   {"zero_extent", Errc::BadHeader},
      {"truncated_payload", Errc::TruncatedPayload}, {"truncated_header", Errc::BadHeader},
      {"trailing_bytes", Errc::BadHeader},   {"empty", Errc::BadMagic}};
  for (const auto& [name, want] : malformed) {
    const auto got = error_code([&] { (void)read_ndt(mmvtest::fixture("ndt/malformed/" + name + ".ndt")); });
    o.require(got == want, name + " raised " + (got ? std::string(errc_name(*got)) : std::string("nothing")));
  }
  if (o.pass) o.detail << files << " files bitwise; " << malformed.size() << " malformed fixtures raise their errors";
}

// ---------------------------------------------------------------- cli

void end_to_end(Outcome& o) {
  TempDir d;
  mmvtest::write_cli_fixture(d.path(), 5, 1010);
  std::string pearson_line;
  for (const char* cmd : {"pair", "cache", "run", "eval"}) {
    const mmvtest::CliResult r = mmvtest::run_cli(d.path(), std::string(cmd) + " -c pipe.yaml");
    o.require(r.code == 0, std::string(cmd) + " exited " + std::to_string(r.code) + ": " + r.output);
    if (std::string(cmd) == "eval") {
      std::istringstream lines(r.output);
      for (std::string l; std::getline(lines, l);)
        if (l.rfind("pearson:", 0) == 0) pearson_line = l;
    }
  }
  o.require(pearson_line == "pearson: 1.000 ± 0.000 (n=5)", "eval printed '" + pearson_line + "'");

  TempDir bad;
  mmvtest::write_cli_fixture(bad.path(), 5, 1011);
  mmvtest::write_bytes(bad / "data" / "source" / "unreadable.ndt", "MMVT garbage");
  mmvtest::write_bytes(bad / "data" / "target" / "unreadable.ndt", "MMVT garbage");
  o.require(mmvtest::run_cli(bad.path(), "pair -c pipe.yaml").code == 0, "pair failed on the injected dataset");
  const mmvtest::CliResult r = mmvtest::run_cli(bad.path(), "run -c pipe.yaml");
  o.require(r.code == 2, "run with an unreadable file exited " + std::to_string(r.code));
  if (o.pass) o.detail << pearson_line << ", exit 0; unreadable input -> exit 2";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"stitching identity", stitching_identity},
      {"blur seamlessness", blur_seamlessness},
      {"normalization oracles", normalization_oracles},
      {"macenko recovery", macenko_recovery},
      {"metric oracles", metric_oracles},
      {"cache scale and idempotence", cache_scale},
      {"epoch coverage", epoch_coverage},
      {"cost-map sampling", costmap_sampling},
      {"ndt round trip", ndt_round_trip},
      {"end-to-end cli", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail.str("");
      o.detail << "exception: " << e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail.str() << std::endl;
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
