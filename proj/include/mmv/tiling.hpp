#pragma once

#include <vector>

#include "mmv/executor.hpp"
#include "mmv/ndimage.hpp"

namespace mmv {

/// Overlapping windows over a spatial shape (Y,X or Z,Y,X). When the image is
/// smaller than the window on an axis, windows address the padded space.
struct TilingPlan {
  Shape source_shape;
  Shape window_size;
  double overlap = 0.0;
  Shape padded_shape;
  std::vector<Roi> windows;  ///< lexicographic by offset
};

/// Per-axis window stride: max(1, floor(window * (1 - overlap))).
std::size_t window_stride(std::size_t window, double overlap);

TilingPlan plan_windows(const Shape& spatial_shape, const Shape& window_size, double overlap);

/// Lower bound of each per-axis profile, so every weight is >= floor^rank.
inline constexpr double kImportanceFloor = 1e-3;

struct ImportanceMap {
  Shape window_size;
  double sigma_scale = 0.125;
  Image weights;  ///< YX or ZYX, max 1 at the center, strictly positive
};

ImportanceMap gaussian_importance(const Shape& window_size, double sigma_scale = 0.125);

struct SlidingOptions {
  std::size_t batch_size = 1;
  std::size_t workers = 1;
};

struct SlidingStats {
  std::size_t windows = 0;
  std::size_t executor_calls = 0;
};

/// Runs `executor` on every window of `plan` and blends the outputs with the
/// importance map. `img` holds an optional C axis plus the plan's spatial
/// axes. The result drops the C axis only when the input had none and the
/// executor emits one channel.
Image run_sliding(const Image& img, Executor& executor, const TilingPlan& plan, const ImportanceMap& importance,
                  const SlidingOptions& options = {}, SlidingStats* stats = nullptr);

struct TilingParams {
  Shape window{64, 64};  ///< one entry per executor spatial axis, or one for all
  double overlap = 0.25;
  double sigma_scale = 0.125;
  std::size_t batch_size = 1;
  std::size_t workers = 1;

  void validate() const;
};

/// Applies run_sliding to every T position (and every Z plane when the
/// executor is 2D) and reassembles the result along those axes.
Image run_over_outer_axes(const Image& img, Executor& executor, const TilingParams& params,
                          SlidingStats* stats = nullptr);

}  // namespace mmv
