#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mmv/ndimage.hpp"

namespace mmv {

enum class NormKind { Percentile, Standard, Center };

struct NormSpec {
  NormKind kind = NormKind::Percentile;
  double p_lo = 0.5;
  double p_hi = 99.5;
  double out_lo = -1.0;
  double out_hi = 1.0;
  /// Fraction of the Z extent, centered, whose statistics drive center normalization.
  double center_fraction = 0.5;

  /// Throws ValidationError when a field is out of range.
  void validate() const;
  friend bool operator==(const NormSpec&, const NormSpec&) = default;
};

/// Percentile with linear interpolation between order statistics (the
/// inclusive method: rank = p/100 * (n-1)). `values` is reordered.
template <typename T>
double percentile_inplace(std::span<T> values, double p) {
  if (values.empty()) throw Error(Errc::EmptyImage, "percentile of empty set");
  const double rank = p / 100.0 * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - double(lo);
  auto nth = values.begin() + std::ptrdiff_t(lo);
  std::nth_element(values.begin(), nth, values.end());
  const double a = static_cast<double>(*nth);
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = static_cast<double>(*std::min_element(nth + 1, values.end()));
  return a + frac * (b - a);
}

template <typename T>
double percentile(std::span<const T> values, double p) {
  std::vector<T> copy(values.begin(), values.end());
  return percentile_inplace(std::span<T>(copy), p);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

/// Two-pass mean and population standard deviation.
MeanStd mean_std(std::span<const float> values);

Image percentile_norm(const Image& img, const NormSpec& spec = {});
Image standard_norm(const Image& img);
Image center_norm(const Image& img, double center_fraction = 0.5);

/// Z range [first, first + count) used by center normalization.
std::pair<std::size_t, std::size_t> center_chunk(std::size_t z_extent, double center_fraction);

/// Dispatches on spec.kind.
Image apply_norm(const Image& img, const NormSpec& spec);

}  // namespace mmv
