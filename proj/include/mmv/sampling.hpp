#pragma once

#include <optional>
#include <random>

#include "mmv/ndimage.hpp"

namespace mmv {

/// Congruent crops of one training sample.
struct PatchPair {
  Image source;
  Image target;
  Image cost;
  Roi origin;  ///< over the spatial axes (Z?, Y, X) of the parent sample
};

inline constexpr int kMaxPatchDraws = 20;

/// Uniform integer in [0, n) from a 64-bit engine (rejection sampling, so the
/// sequence is identical on every platform).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Draws a uniformly random spatial window of `patch_size` (one extent per
/// spatial axis) and crops source, target and cost map congruently. Draws
/// whose cost sum is zero are rejected; after kMaxPatchDraws rejections the
/// sample raises AllExcluded. Without a cost map the cost patch is all ones.
PatchPair sample_patch(const Image& source, const Image& target, const std::optional<Image>& costmap,
                       const Shape& patch_size, std::mt19937_64& rng);

}  // namespace mmv
