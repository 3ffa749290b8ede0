#include "mmv/tiling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace mmv {

std::size_t window_stride(std::size_t window, double overlap) {
  // The epsilon keeps e.g. 10 * (1 - 0.9) from flooring to 0.
  const double s = std::floor(double(window) * (1.0 - overlap) + 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(s));
}

TilingPlan plan_windows(const Shape& spatial_shape, const Shape& window_size, double overlap) {
  if (spatial_shape.size() != window_size.size() || spatial_shape.empty())
    throw Error(Errc::InvalidArgument, "window rank " + std::to_string(window_size.size()) + " does not match image rank " +
                                           std::to_string(spatial_shape.size()));
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(Errc::InvalidArgument, "overlap must be in [0,1)");
  for (std::size_t w : window_size)
    if (w == 0) throw Error(Errc::InvalidArgument, "window extents must be >= 1");

  TilingPlan plan;
  plan.source_shape = spatial_shape;
  plan.window_size = window_size;
  plan.overlap = overlap;
  const std::size_t r = spatial_shape.size();
  std::vector<Shape> offsets(r);
  for (std::size_t a = 0; a < r; ++a) {
    const std::size_t padded = std::max(spatial_shape[a], window_size[a]);
    plan.padded_shape.push_back(padded);
    const std::size_t last = padded - window_size[a];
    const std::size_t stride = window_stride(window_size[a], overlap);
    for (std::size_t o = 0; o < last; o += stride) offsets[a].push_back(o);
    offsets[a].push_back(last);
  }

  Shape counts(r);
  for (std::size_t a = 0; a < r; ++a) counts[a] = offsets[a].size();
  Shape idx(r, 0);
  const std::size_t total = shape_product(counts);
  plan.windows.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    Roi w{Shape(r), window_size};
    for (std::size_t a = 0; a < r; ++a) w.offset[a] = offsets[a][idx[a]];
    plan.windows.push_back(std::move(w));
    for (std::size_t a = r; a-- > 0;) {
      if (++idx[a] < counts[a]) break;
      idx[a] = 0;
    }
  }
  return plan;
}

ImportanceMap gaussian_importance(const Shape& window_size, double sigma_scale) {
  if (!(sigma_scale > 0.0)) throw Error(Errc::InvalidArgument, "sigma_scale must be > 0");
  if (window_size.size() != 2 && window_size.size() != 3)
    throw Error(Errc::InvalidArgument, "importance map needs a 2D or 3D window");

  // Separable: per-axis gaussian profiles, each scaled to max 1 and floored,
  // then multiplied. Flooring the profiles rather than the product keeps a
  // window's far corner well below the weight of a neighbour's interior.
  std::vector<std::vector<double>> profile(window_size.size());
  for (std::size_t a = 0; a < window_size.size(); ++a) {
    const double n = double(window_size[a]);
    const double c = (n - 1.0) / 2.0;
    const double sigma = sigma_scale * n;
    for (std::size_t p = 0; p < window_size[a]; ++p) {
      const double d = double(p) - c;
      profile[a].push_back(std::exp(-d * d / (2.0 * sigma * sigma)));
    }
    const double top = *std::max_element(profile[a].begin(), profile[a].end());
    for (double& v : profile[a]) v = std::max(v / top, kImportanceFloor);
  }

  const AxisList axes = window_size.size() == 3 ? AxisList{Axis::Z, Axis::Y, Axis::X} : AxisList{Axis::Y, Axis::X};
  Image weights(axes, window_size);
  std::vector<double> raw(weights.size());
  double peak = 0.0;
  std::size_t i = 0;
  detail::for_each_row(window_size, [&](const Shape& idx) {
    double outer = 1.0;
    for (std::size_t a = 0; a + 1 < idx.size(); ++a) outer *= profile[a][idx[a]];
    for (double px : profile.back()) {
      raw[i] = outer * px;
      peak = std::max(peak, raw[i]);
      ++i;
    }
  });
  auto w = weights.data();
  for (std::size_t k = 0; k < raw.size(); ++k) w[k] = static_cast<float>(raw[k] / peak);
  return ImportanceMap{window_size, sigma_scale, std::move(weights)};
}

namespace {

Image pad_to(const Image& img, const Shape& padded_spatial) {
  Image cur = img;
  const AxisList spatial = img.spatial_axes();
  for (std::size_t k = 0; k < spatial.size(); ++k) {
    const std::size_t a = *img.axis_index(spatial[k]);
    const std::size_t have = img.shape()[a];
    if (padded_spatial[k] == have) continue;
    Shape before(img.rank(), 0), after(img.rank(), 0);
    after[a] = padded_spatial[k] - have;
    cur = pad(cur, before, after, have >= 2 ? PadMode::reflect() : PadMode::edge());
  }
  return cur;
}

}  // namespace

Image run_sliding(const Image& img, Executor& executor, const TilingPlan& plan, const ImportanceMap& importance,
                  const SlidingOptions& options, SlidingStats* stats) {
  const ExecutorSpec& spec = executor.spec();
  const std::size_t rank = plan.window_size.size();
  if (img.has_axis(Axis::T)) throw Error(Errc::InvalidArgument, "run_sliding takes no T axis; use run_over_outer_axes");
  if (img.spatial_axes().size() != rank || int(rank) != spec.spatial_rank)
    throw Error(Errc::ShapeMismatch, "image " + axes_string(img.axes()) + " does not match a " + std::to_string(rank) +
                                         "D plan and a " + std::to_string(spec.spatial_rank) + "D executor");
  if (img.spatial_shape() != plan.source_shape)
    throw Error(Errc::ShapeMismatch, "image spatial shape " + shape_string(img.spatial_shape()) + " differs from plan " +
                                         shape_string(plan.source_shape));
  if (importance.weights.shape() != plan.window_size)
    throw Error(Errc::ShapeMismatch, "importance map does not match the window size");

  const Image x = pad_to(ensure_axes(img, {Axis::C}), plan.padded_shape);
  const std::size_t cin = x.shape()[0];
  if (cin != spec.in_channels)
    throw Error(Errc::ChannelMismatch, "image has " + std::to_string(cin) + " channels, executor expects " +
                                           std::to_string(spec.in_channels));
  const std::size_t cout = spec.out_channels;

  const Shape& padded = plan.padded_shape;
  const std::size_t plane = shape_product(padded);
  std::vector<float> value(cout * plane, 0.0f), weight(plane, 0.0f);
  Shape pstride(rank, 1);
  for (std::size_t a = rank - 1; a-- > 0;) pstride[a] = pstride[a + 1] * padded[a + 1];

  const std::size_t nwin = plan.windows.size();
  const std::size_t bs = std::max<std::size_t>(1, std::min(options.batch_size, executor.max_batch()));
  const std::size_t nbatch = (nwin + bs - 1) / bs;
  const std::size_t wsize = shape_product(plan.window_size);
  const auto imp = importance.weights.data();

  std::mutex acc_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> calls{0};
  std::vector<std::exception_ptr> errors(nbatch);

  auto process = [&](std::size_t b) {
    const std::size_t first = b * bs, last = std::min(nwin, first + bs);
    std::vector<Image> parts;
    parts.reserve(last - first);
    for (std::size_t w = first; w < last; ++w) {
      Roi roi{Shape(1 + rank, 0), Shape(1 + rank)};
      roi.size[0] = cin;
      for (std::size_t a = 0; a < rank; ++a) {
        roi.offset[1 + a] = plan.windows[w].offset[a];
        roi.size[1 + a] = plan.windows[w].size[a];
      }
      parts.push_back(crop(x, roi));
    }
    const Image batch = stack(parts, Axis::T);

    Image out;
    try {
      out = executor.run(batch, first);
    } catch (const Error& e) {
      if (e.code() == Errc::ShapeMismatch) throw Error(Errc::ShapeMismatch, "window " + std::to_string(first) + ": " + e.detail(), first);
      throw Error(Errc::ExecutorFailure, "window " + std::to_string(first) + ": " + e.what(), first);
    } catch (const std::exception& e) {
      throw Error(Errc::ExecutorFailure, "window " + std::to_string(first) + ": " + e.what(), first);
    }
    ++calls;
    Shape want = batch.shape();
    want[1] = cout;
    if (out.axes() != batch.axes() || out.shape() != want)
      throw Error(Errc::ShapeMismatch, "window " + std::to_string(first) + ": executor returned " + axes_string(out.axes()) +
                                           " " + shape_string(out.shape()) + ", expected " + shape_string(want), first);

    const auto src = out.data();
    std::lock_guard lock(acc_mu);
    for (std::size_t w = first; w < last; ++w) {
      std::size_t base = 0;
      for (std::size_t a = 0; a < rank; ++a) base += plan.windows[w].offset[a] * pstride[a];
      const std::size_t row = plan.window_size.back();
      const float* o = src.data() + (w - first) * cout * wsize;
      std::size_t k = 0;
      detail::for_each_row(plan.window_size, [&](const Shape& idx) {
        std::size_t p = base;
        for (std::size_t a = 0; a + 1 < rank; ++a) p += idx[a] * pstride[a];
        for (std::size_t i = 0; i < row; ++i) weight[p + i] += imp[k + i];
        for (std::size_t c = 0; c < cout; ++c) {
          float* v = value.data() + c * plane + p;
          const float* oc = o + c * wsize + k;
          for (std::size_t i = 0; i < row; ++i) v[i] += oc[i] * imp[k + i];
        }
        k += row;
      });
    }
  };

  auto worker = [&] {
    for (;;) {
      if (stop) return;
      const std::size_t b = next++;
      if (b >= nbatch) return;
      try {
        process(b);
      } catch (...) {
        errors[b] = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t nworkers = std::max<std::size_t>(1, std::min(options.workers, nbatch));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t c = 0; c < cout; ++c)
    for (std::size_t p = 0; p < plane; ++p) value[c * plane + p] /= weight[p];

  AxisList axes{Axis::C};
  for (Axis a : img.spatial_axes()) axes.push_back(a);
  Shape shape{cout};
  shape.insert(shape.end(), padded.begin(), padded.end());
  Image blended(axes, shape, std::move(value));
  Image result = blended;
  if (padded != plan.source_shape) {
    Roi back = full_roi(shape);
    for (std::size_t a = 0; a < rank; ++a) back.size[1 + a] = plan.source_shape[a];
    result = crop(blended, back);
  }
  if (!img.has_axis(Axis::C) && cout == 1) result = squeeze_axis(result, Axis::C);
  result.set_pixel_size(img.pixel_size());

  if (stats) {
    stats->windows += nwin;
    stats->executor_calls += calls;
  }
  return result;
}

void TilingParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ValidationError, what); };
  if (window.empty() || window.size() > 3) fail("inference.window needs 1 to 3 entries");
  for (auto w : window)
    if (w < 1) fail("inference.window entries must be >= 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) fail("inference.overlap must be in [0,1)");
  if (!(sigma_scale > 0.0)) fail("inference.sigma_scale must be > 0");
  if (batch_size < 1) fail("inference.batch_size must be >= 1");
  if (workers < 1) fail("inference.workers must be >= 1");
}

Image run_over_outer_axes(const Image& img, Executor& executor, const TilingParams& params, SlidingStats* stats) {
  params.validate();
  const ExecutorSpec& spec = executor.spec();
  const auto rank = std::size_t(spec.spatial_rank);
  Shape window = params.window;
  if (window.size() == 1) window.assign(rank, window[0]);
  if (window.size() != rank)
    throw Error(Errc::ValidationError, "inference.window has " + std::to_string(window.size()) + " entries, executor is " +
                                           std::to_string(rank) + "D");
  if (img.extent(Axis::C) != spec.in_channels)
    throw Error(Errc::ChannelMismatch, "image has " + std::to_string(img.extent(Axis::C)) + " channels, executor expects " +
                                           std::to_string(spec.in_channels));

  Image x = img;
  const bool added_z = rank == 3 && !x.has_axis(Axis::Z);
  if (added_z) x = ensure_axes(x, {Axis::Z});
  const bool per_plane = rank == 2 && x.has_axis(Axis::Z);

  Shape spatial;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    const Axis a = x.axes()[i];
    if (a == Axis::Y || a == Axis::X || (a == Axis::Z && rank == 3)) spatial.push_back(x.shape()[i]);
  }
  const TilingPlan plan = plan_windows(spatial, window, params.overlap);
  const ImportanceMap importance = gaussian_importance(window, params.sigma_scale);
  const SlidingOptions opts{params.batch_size, params.workers};

  auto run_frame = [&](const Image& frame) {
    if (!per_plane) return run_sliding(frame, executor, plan, importance, opts, stats);
    std::vector<Image> planes;
    for (std::size_t z = 0; z < frame.extent(Axis::Z); ++z)
      planes.push_back(run_sliding(slice(frame, Axis::Z, z), executor, plan, importance, opts, stats));
    return stack(planes, Axis::Z);
  };

  Image out;
  if (x.has_axis(Axis::T)) {
    std::vector<Image> frames;
    for (std::size_t t = 0; t < x.extent(Axis::T); ++t) frames.push_back(run_frame(slice(x, Axis::T, t)));
    out = stack(frames, Axis::T);
  } else {
    out = run_frame(x);
  }
  if (added_z) out = squeeze_axis(out, Axis::Z);
  out.set_pixel_size(img.pixel_size());
  return out;
}

}  // namespace mmv
