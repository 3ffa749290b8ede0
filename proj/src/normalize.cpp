#include "mmv/normalize.hpp"

#include <string>

namespace mmv {

void NormSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ValidationError, what); };
  if (!(p_lo >= 0.0 && p_lo < 100.0)) fail("p_lo must be in [0,100)");
  if (!(p_hi > 0.0 && p_hi <= 100.0)) fail("p_hi must be in (0,100]");
  if (!(p_lo < p_hi)) fail("p_lo must be < p_hi");
  if (!(out_lo < out_hi)) fail("out_lo must be < out_hi");
  if (!(center_fraction > 0.0 && center_fraction <= 1.0)) fail("center_fraction must be in (0,1]");
}

MeanStd mean_std(std::span<const float> values) {
  if (values.empty()) throw Error(Errc::EmptyImage, "statistics of empty set");
  const Eigen::Map<const Eigen::ArrayXf> v(values.data(), Eigen::Index(values.size()));
  const double mean = v.cast<double>().mean();
  const double var = (v.cast<double>() - mean).square().mean();
  return {mean, std::sqrt(var)};
}

Image percentile_norm(const Image& img, const NormSpec& spec) {
  spec.validate();
  if (img.size() < 2) throw Error(Errc::EmptyImage, "percentile normalization needs >= 2 elements");
  std::vector<float> work(img.data().begin(), img.data().end());
  const double v_lo = percentile_inplace(std::span<float>(work), spec.p_lo);
  const double v_hi = percentile_inplace(std::span<float>(work), spec.p_hi);

  Image out = img;
  auto dst = out.data();
  if (v_lo == v_hi) {
    std::fill(dst.begin(), dst.end(), static_cast<float>((spec.out_lo + spec.out_hi) / 2.0));
    return out;
  }
  const double scale = (spec.out_hi - spec.out_lo) / (v_hi - v_lo);
  for (float& v : dst) {
    const double c = std::clamp(static_cast<double>(v), v_lo, v_hi);
    v = static_cast<float>(spec.out_lo + (c - v_lo) * scale);
  }
  return out;
}

namespace {

Image z_score(const Image& img, const MeanStd& s) {
  if (s.std == 0.0) throw Error(Errc::ZeroVariance, "standard deviation is zero");
  Image out = img;
  out.array() = ((img.array().cast<double>() - s.mean) / s.std).cast<float>();
  return out;
}

}  // namespace

Image standard_norm(const Image& img) { return z_score(img, mean_std(img.data())); }

std::pair<std::size_t, std::size_t> center_chunk(std::size_t z_extent, double center_fraction) {
  auto count = static_cast<std::size_t>(std::llround(center_fraction * double(z_extent)));
  count = std::clamp<std::size_t>(count, 1, z_extent);
  return {(z_extent - count) / 2, count};
}

Image center_norm(const Image& img, double center_fraction) {
  if (!(center_fraction > 0.0 && center_fraction <= 1.0))
    throw Error(Errc::ValidationError, "center_fraction must be in (0,1]");
  const auto z = img.axis_index(Axis::Z);
  if (!z) throw Error(Errc::NoZAxis, "center normalization needs a Z axis, image is " + axes_string(img.axes()));
  const auto [first, count] = center_chunk(img.shape()[*z], center_fraction);
  Roi roi = full_roi(img.shape());
  roi.offset[*z] = first;
  roi.size[*z] = count;
  const Image chunk = crop(img, roi);
  return z_score(img, mean_std(chunk.data()));
}

Image apply_norm(const Image& img, const NormSpec& spec) {
  switch (spec.kind) {
    case NormKind::Percentile: return percentile_norm(img, spec);
    case NormKind::Standard: return standard_norm(img);
    case NormKind::Center: return center_norm(img, spec.center_fraction);
  }
  throw Error(Errc::InvalidArgument, "unknown normalization kind");
}

}  // namespace mmv
