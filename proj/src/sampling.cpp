#include "mmv/sampling.hpp"

#include <algorithm>
#include <limits>

namespace mmv {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return std::size_t(v % range);
}

namespace {

Roi roi_for(const Image& img, const Roi& spatial) {
  Roi r = full_roi(img.shape());
  std::size_t k = 0;
  for (std::size_t a = 0; a < img.rank(); ++a) {
    if (!is_spatial(img.axes()[a])) continue;
    r.offset[a] = spatial.offset[k];
    r.size[a] = spatial.size[k];
    ++k;
  }
  return r;
}

void require_congruent(const Image& a, const Image& b, const char* what) {
  if (a.spatial_axes() != b.spatial_axes() || a.spatial_shape() != b.spatial_shape())
    throw Error(Errc::ShapeMismatch, std::string(what) + " is not spatially congruent with the source (" +
                                         shape_string(b.spatial_shape()) + " vs " + shape_string(a.spatial_shape()) + ")");
}

}  // namespace

PatchPair sample_patch(const Image& source, const Image& target, const std::optional<Image>& costmap,
                       const Shape& patch_size, std::mt19937_64& rng) {
  require_congruent(source, target, "target");
  if (costmap) {
    require_congruent(source, *costmap, "cost map");
    if (std::any_of(costmap->data().begin(), costmap->data().end(), [](float v) { return !(v >= 0.0f); }))
      throw Error(Errc::InvalidArgument, "cost map values must be >= 0");
  }
  const Shape extents = source.spatial_shape();
  if (patch_size.size() != extents.size())
    throw Error(Errc::InvalidArgument, "patch size has " + std::to_string(patch_size.size()) + " entries, image has " +
                                           std::to_string(extents.size()) + " spatial axes");
  for (std::size_t k = 0; k < extents.size(); ++k)
    if (patch_size[k] == 0 || patch_size[k] > extents[k])
      throw Error(Errc::InvalidArgument, "patch " + shape_string(patch_size) + " does not fit spatial extent " +
                                             shape_string(extents) + "; pad upstream");

  Roi spatial{Shape(extents.size(), 0), patch_size};
  for (int draw = 0; draw < kMaxPatchDraws; ++draw) {
    for (std::size_t k = 0; k < extents.size(); ++k)
      spatial.offset[k] = uniform_index(rng, extents[k] - patch_size[k] + 1);

    std::optional<Image> cost;
    if (costmap) {
      cost = crop(*costmap, roi_for(*costmap, spatial));
      double sum = 0.0;
      for (float v : cost->data()) sum += v;
      if (sum == 0.0) continue;
    } else {
      cost = Image(source.spatial_axes(), patch_size, std::vector<float>(shape_product(patch_size), 1.0f));
    }
    return PatchPair{crop(source, roi_for(source, spatial)), crop(target, roi_for(target, spatial)),
                     std::move(*cost), spatial};
  }
  throw Error(Errc::AllExcluded, std::to_string(kMaxPatchDraws) + " draws of patch " + shape_string(patch_size) +
                                     " all landed on zero cost");
}

}  // namespace mmv
