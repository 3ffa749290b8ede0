#include "mmv/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "json_io.hpp"
#include "mmv/io.hpp"

namespace mmv {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.axes() != b.axes() || a.shape() != b.shape())
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + axes_string(a.axes()) + " " + shape_string(a.shape()) +
                                         " vs " + axes_string(b.axes()) + " " + shape_string(b.shape()));
}

// Sums of `in` over every length-w run along `axis`; that axis shrinks to n-w+1.
std::vector<double> box_valid(const std::vector<double>& in, Shape& dims, std::size_t axis, std::size_t w) {
  std::size_t pre = 1, post = 1;
  for (std::size_t a = 0; a < axis; ++a) pre *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) post *= dims[a];
  const std::size_t n = dims[axis], m = n - w + 1;
  std::vector<double> out(pre * m * post);
  for (std::size_t p = 0; p < pre; ++p) {
    const double* src = in.data() + p * n * post;
    double* dst = out.data() + p * m * post;
    for (std::size_t q = 0; q < post; ++q) {
      double run = 0.0;
      for (std::size_t j = 0; j < w; ++j) run += src[j * post + q];
      dst[q] = run;
      for (std::size_t i = 1; i < m; ++i) {
        run += src[(i + w - 1) * post + q] - src[(i - 1) * post + q];
        dst[i * post + q] = run;
      }
    }
  }
  dims[axis] = m;
  return out;
}

struct MaskCounts {
  std::size_t pred = 0, gt = 0, both = 0;
};

MaskCounts count_masks(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "mask shapes differ");
  MaskCounts c;
  const auto p = pred.data(), g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if ((p[i] != 0.0f && p[i] != 1.0f) || (g[i] != 0.0f && g[i] != 1.0f))
      throw Error(Errc::NonBinaryInput, "mask value at element " + std::to_string(i) + " is not 0 or 1");
    const bool a = p[i] == 1.0f, b = g[i] == 1.0f;
    c.pred += a;
    c.gt += b;
    c.both += a && b;
  }
  return c;
}

std::string fixed3(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace

double pearson(const Image& a, const Image& b) {
  require_same_shape(a, b, "pearson");
  if (a.size() == 0) throw Error(Errc::EmptyImage, "pearson of empty images");
  const Eigen::ArrayXd x = a.array().cast<double>();
  const Eigen::ArrayXd y = b.array().cast<double>();
  const double mx = x.mean(), my = y.mean();
  const double sxy = ((x - mx) * (y - my)).sum();
  const double sxx = (x - mx).square().sum();
  const double syy = (y - my).square().sum();
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ZeroVariance, "pearson needs nonzero variance in both images");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double ssim(const Image& a, const Image& b, double data_range, const SsimOptions& options) {
  require_same_shape(a, b, "ssim");
  if (!(data_range > 0.0)) throw Error(Errc::InvalidArgument, "ssim data_range must be > 0");
  if (options.window < 1) throw Error(Errc::InvalidArgument, "ssim window must be >= 1");
  const std::size_t w = options.window;

  // Canonical order puts T and C ahead of the spatial axes, so the buffer is
  // [outer, (Z,) Y, X] row-major.
  const std::size_t z = a.extent(Axis::Z), y = a.extent(Axis::Y), x = a.extent(Axis::X);
  Shape dims{a.size() / (z * y * x)};
  if (z > 1) dims.push_back(z);
  dims.push_back(y);
  dims.push_back(x);
  for (std::size_t k = 1; k < dims.size(); ++k)
    if (dims[k] < w)
      throw Error(Errc::TooSmallForWindow, "spatial shape " + shape_string(a.spatial_shape()) + " is smaller than the " +
                                               std::to_string(w) + "-wide ssim window");

  const auto pa = a.data(), pb = b.data();
  std::vector<double> sa(pa.begin(), pa.end()), sb(pb.begin(), pb.end()), saa(a.size()), sbb(a.size()), sab(a.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    saa[i] = sa[i] * sa[i];
    sbb[i] = sb[i] * sb[i];
    sab[i] = sa[i] * sb[i];
  }
  for (auto* v : {&sa, &sb, &saa, &sbb, &sab}) {
    Shape d = dims;
    for (std::size_t k = 1; k < d.size(); ++k) *v = box_valid(*v, d, k, w);
  }

  const double count = std::pow(double(w), double(dims.size() - 1));
  const double c1 = (options.k1 * data_range) * (options.k1 * data_range);
  const double c2 = (options.k2 * data_range) * (options.k2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double ma = sa[i] / count, mb = sb[i] / count;
    const double va = saa[i] / count - ma * ma;
    const double vb = sbb[i] / count - mb * mb;
    const double cov = sab[i] / count - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / double(sa.size());
}

Image threshold_mask(const Image& img, double t) {
  Image out = img;
  out.array() = (img.array().cast<double>() >= t).cast<float>();
  return out;
}

double dice_f1(const Image& pred, const Image& gt) {
  const MaskCounts c = count_masks(pred, gt);
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * double(c.both) / double(c.pred + c.gt);
}

double iou(const Image& pred, const Image& gt) {
  const MaskCounts c = count_masks(pred, gt);
  const std::size_t uni = c.pred + c.gt - c.both;
  if (uni == 0) return 1.0;
  return double(c.both) / double(uni);
}

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::Pearson: return "pearson";
    case Metric::Ssim: return "ssim";
    case Metric::Dice: return "dice";
    case Metric::Iou: return "iou";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  if (s == "pearson") return Metric::Pearson;
  if (s == "ssim") return Metric::Ssim;
  if (s == "dice" || s == "f1") return Metric::Dice;
  if (s == "iou") return Metric::Iou;
  throw Error(Errc::ValidationError, "unknown metric '" + std::string(s) + "' (pearson, ssim, dice, iou)");
}

std::string MetricReport::line() const {
  return name + ": " + fixed3(mean) + " ± " + fixed3(std) + " (n=" + std::to_string(n) + ")";
}

MetricReport make_report(std::string name, std::vector<std::string> ids, std::vector<double> values) {
  MetricReport r;
  r.name = std::move(name);
  r.ids = std::move(ids);
  r.values = std::move(values);
  r.n = r.values.size();
  if (r.n == 0) {
    r.mean = r.std = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / double(r.n);
  double ss = 0.0;
  for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / double(r.n));
  return r;
}

EvalResult evaluate_set(const std::vector<EvalPair>& pairs, const EvalOptions& options) {
  if (options.metrics.empty()) throw Error(Errc::ValidationError, "eval.metrics is empty");
  for (Metric m : options.metrics)
    if (m == Metric::Ssim && !(options.data_range && *options.data_range > 0.0))
      throw Error(Errc::ValidationError, "ssim needs eval.data_range > 0");

  std::vector<EvalPair> sorted = pairs;
  std::sort(sorted.begin(), sorted.end(), [](const EvalPair& l, const EvalPair& r) { return l.id < r.id; });

  struct Slot {
    std::vector<std::optional<double>> values;
    std::vector<EvalFailure> failures;
  };
  std::vector<Slot> slots(sorted.size());

  auto evaluate_one = [&](std::size_t i) {
    const EvalPair& p = sorted[i];
    Slot& slot = slots[i];
    slot.values.assign(options.metrics.size(), std::nullopt);
    Image pred, gt;
    try {
      pred = read_image(p.prediction);
      gt = read_image(p.ground_truth);
    } catch (const std::exception& e) {
      slot.failures.push_back({p.id, "", e.what()});
      return;
    }
    for (std::size_t m = 0; m < options.metrics.size(); ++m) {
      const Metric metric = options.metrics[m];
      try {
        switch (metric) {
          case Metric::Pearson: slot.values[m] = pearson(pred, gt); break;
          case Metric::Ssim: slot.values[m] = ssim(pred, gt, *options.data_range); break;
          case Metric::Dice: slot.values[m] = dice_f1(threshold_mask(pred, options.threshold), gt); break;
          case Metric::Iou: slot.values[m] = iou(threshold_mask(pred, options.threshold), gt); break;
        }
      } catch (const std::exception& e) {
        slot.failures.push_back({p.id, std::string(metric_name(metric)), e.what()});
      }
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < sorted.size();) evaluate_one(i);
  };
  const std::size_t nworkers = std::max<std::size_t>(1, std::min(options.workers, sorted.size()));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
  }

  EvalResult result;
  for (std::size_t m = 0; m < options.metrics.size(); ++m) {
    std::vector<std::string> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (slots[i].values.size() > m && slots[i].values[m]) {
        ids.push_back(sorted[i].id);
        values.push_back(*slots[i].values[m]);
      }
    result.reports.push_back(make_report(std::string(metric_name(options.metrics[m])), std::move(ids), std::move(values)));
  }
  for (auto& s : slots)
    for (auto& f : s.failures) result.failures.push_back(std::move(f));
  return result;
}

std::string eval_report_json(const EvalResult& result) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json metrics = Json::object();
  for (const auto& r : result.reports) {
    Json values = Json::object();
    for (std::size_t i = 0; i < r.ids.size(); ++i) values[r.ids[i]] = num(r.values[i]);
    metrics[r.name] = {{"mean", num(r.mean)}, {"std", num(r.std)}, {"n", r.n}, {"line", r.line()}, {"values", values}};
  }
  Json failures = Json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"id", f.id}, {"metric", f.metric.empty() ? Json(nullptr) : Json(f.metric)}, {"error", f.message}});
  return dump_json(Json{{"metrics", metrics}, {"failures", failures}});
}

}  // namespace mmv
