#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mmv/error.hpp"

namespace mmv {

/// Image axes. The numeric value is the canonical position: T, C, Z, Y, X.
enum class Axis : std::uint8_t { T = 0, C = 1, Z = 2, Y = 3, X = 4 };

inline constexpr std::array<Axis, 5> kCanonicalAxes{Axis::T, Axis::C, Axis::Z, Axis::Y,
                                                    Axis::X};

using AxisList = std::vector<Axis>;
using Shape = std::vector<std::size_t>;

constexpr char axis_label(Axis a) noexcept { return "TCZYX"[static_cast<int>(a)]; }

constexpr std::optional<Axis> axis_from_label(char c) noexcept {
  switch (c) {
    case 'T': return Axis::T;
    case 'C': return Axis::C;
    case 'Z': return Axis::Z;
    case 'Y': return Axis::Y;
    case 'X': return Axis::X;
    default: return std::nullopt;
  }
}

constexpr bool is_spatial(Axis a) noexcept { return a == Axis::Z || a == Axis::Y || a == Axis::X; }

inline std::string axes_string(const AxisList& axes) {
  std::string s;
  for (Axis a : axes) s.push_back(axis_label(a));
  return s;
}

/// Parses labels such as "CZYX". Throws InvalidArgument on unknown labels or
/// non-canonical order.
AxisList parse_axes(std::string_view labels);

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s.push_back('x');
    s += std::to_string(shape[i]);
  }
  return s;
}

/// Physical voxel size in micrometers. Carried along, never computed with.
struct PixelSize {
  std::optional<double> z, y, x;
  friend bool operator==(const PixelSize&, const PixelSize&) = default;
};

/// Dense N-dimensional image (2 to 5 axes, canonical T,C,Z,Y,X order, Y and X
/// always present). Row-major with the last axis fastest.
template <typename Scalar>
class BasicImage {
 public:
  using value_type = Scalar;
  using ArrayMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using ConstArrayMap = Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>;

  /// A 1x1 YX image holding zero.
  BasicImage() : BasicImage({Axis::Y, Axis::X}, {1, 1}) {}

  BasicImage(AxisList axes, Shape shape)
      : axes_(std::move(axes)), shape_(std::move(shape)) {
    validate_layout();
    data_.assign(shape_product(shape_), Scalar{0});
  }

  BasicImage(AxisList axes, Shape shape, std::vector<Scalar> data)
      : axes_(std::move(axes)), shape_(std::move(shape)), data_(std::move(data)) {
    validate_layout();
    if (data_.size() != shape_product(shape_)) {
      throw Error(Errc::InvalidArgument,
                  "buffer holds " + std::to_string(data_.size()) + " elements, shape " +
                      shape_string(shape_) + " needs " + std::to_string(shape_product(shape_)));
    }
  }

  const AxisList& axes() const noexcept { return axes_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::optional<std::size_t> axis_index(Axis a) const noexcept {
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (axes_[i] == a) return i;
    return std::nullopt;
  }
  bool has_axis(Axis a) const noexcept { return axis_index(a).has_value(); }
  /// Extent along `a`, or 1 when the axis is absent.
  std::size_t extent(Axis a) const noexcept {
    auto i = axis_index(a);
    return i ? shape_[*i] : 1;
  }

  Shape strides() const {
    Shape s(shape_.size(), 1);
    for (std::size_t i = shape_.size(); i-- > 1;) s[i - 1] = s[i] * shape_[i];
    return s;
  }

  AxisList spatial_axes() const {
    AxisList out;
    for (Axis a : axes_)
      if (is_spatial(a)) out.push_back(a);
    return out;
  }
  Shape spatial_shape() const {
    Shape out;
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (is_spatial(axes_[i])) out.push_back(shape_[i]);
    return out;
  }

  std::span<const Scalar> data() const noexcept { return data_; }
  std::span<Scalar> data() noexcept { return data_; }
  const std::vector<Scalar>& buffer() const noexcept { return data_; }

  ConstArrayMap array() const { return ConstArrayMap(data_.data(), Eigen::Index(data_.size())); }
  ArrayMap array() { return ArrayMap(data_.data(), Eigen::Index(data_.size())); }

  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }

  std::size_t offset_of(std::span<const std::size_t> index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < shape_.size(); ++i) off = off * shape_[i] + index[i];
    return off;
  }
  Scalar at(std::initializer_list<std::size_t> index) const {
    return data_[offset_of(std::span(index.begin(), index.size()))];
  }
  Scalar& at(std::initializer_list<std::size_t> index) {
    return data_[offset_of(std::span(index.begin(), index.size()))];
  }

  const PixelSize& pixel_size() const noexcept { return pixel_size_; }
  void set_pixel_size(PixelSize p) { pixel_size_ = p; }

  bool same_layout(const BasicImage& o) const { return axes_ == o.axes_ && shape_ == o.shape_; }

  friend bool operator==(const BasicImage&, const BasicImage&) = default;

 private:
  void validate_layout() const {
    if (axes_.size() != shape_.size())
      throw Error(Errc::InvalidArgument, "axes/shape length differ");
    if (axes_.size() < 2 || axes_.size() > 5)
      throw Error(Errc::InvalidArgument, "image rank must be 2..5, got " + std::to_string(axes_.size()));
    for (std::size_t i = 1; i < axes_.size(); ++i)
      if (axes_[i - 1] >= axes_[i])
        throw Error(Errc::InvalidArgument, "axes not in canonical TCZYX order: " + axes_string(axes_));
    if (axes_[axes_.size() - 2] != Axis::Y || axes_.back() != Axis::X)
      throw Error(Errc::InvalidArgument, "Y and X axes are required: " + axes_string(axes_));
    for (std::size_t e : shape_)
      if (e == 0) throw Error(Errc::InvalidArgument, "zero extent in shape " + shape_string(shape_));
  }

  AxisList axes_;
  Shape shape_;
  std::vector<Scalar> data_;
  PixelSize pixel_size_;
};

using Image = BasicImage<float>;
using ImageU8 = BasicImage<std::uint8_t>;
using ImageU16 = BasicImage<std::uint16_t>;

template <typename To, typename From>
BasicImage<To> cast(const BasicImage<From>& img) {
  std::vector<To> out(img.size());
  std::transform(img.data().begin(), img.data().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  BasicImage<To> r(img.axes(), img.shape(), std::move(out));
  r.set_pixel_size(img.pixel_size());
  return r;
}

/// Per-axis region of interest, one entry per image axis.
struct Roi {
  Shape offset;
  Shape size;
  friend bool operator==(const Roi&, const Roi&) = default;
};

inline Roi full_roi(const Shape& shape) { return Roi{Shape(shape.size(), 0), shape}; }

namespace detail {

/// Visits every row (run along the last axis) of a region with extents `region`.
/// `fn` receives the multi-index of the row start (last coordinate 0).
template <typename Fn>
void for_each_row(const Shape& region, Fn&& fn) {
  const std::size_t r = region.size();
  Shape idx(r, 0);
  const std::size_t rows = shape_product(region) / region.back();
  for (std::size_t n = 0; n < rows; ++n) {
    fn(std::as_const(idx));
    for (std::size_t a = r - 1; a-- > 0;) {
      if (++idx[a] < region[a]) break;
      idx[a] = 0;
    }
  }
}

/// Whole-sample mirror (no edge repeat); any distance, period 2(n-1).
inline std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

template <typename Scalar>
BasicImage<Scalar> crop(const BasicImage<Scalar>& img, const Roi& roi) {
  const Shape& shape = img.shape();
  if (roi.offset.size() != shape.size() || roi.size.size() != shape.size())
    throw Error(Errc::InvalidArgument, "roi rank differs from image rank");
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (roi.size[a] == 0 || roi.offset[a] + roi.size[a] > shape[a])
      throw Error(Errc::RoiOutOfBounds,
                  "axis " + std::string(1, axis_label(img.axes()[a])) + ": offset " +
                      std::to_string(roi.offset[a]) + " + size " + std::to_string(roi.size[a]) +
                      " exceeds extent " + std::to_string(shape[a]));
  }
  BasicImage<Scalar> out(img.axes(), roi.size);
  const Shape strides = img.strides();
  const std::size_t run = roi.size.back();
  auto src = img.data();
  auto dst = out.data();
  std::size_t o = 0;
  detail::for_each_row(roi.size, [&](const Shape& idx) {
    std::size_t in = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) in += (roi.offset[a] + idx[a]) * strides[a];
    std::copy_n(src.begin() + std::ptrdiff_t(in), run, dst.begin() + std::ptrdiff_t(o));
    o += run;
  });
  out.set_pixel_size(img.pixel_size());
  return out;
}

/// Pad fill rule. `reflect` mirrors without repeating the edge element;
/// `edge` replicates the border value.
struct PadMode {
  enum class Kind { Constant, Reflect, Edge };
  Kind kind = Kind::Constant;
  double value = 0.0;

  static PadMode constant(double v) { return {Kind::Constant, v}; }
  static PadMode reflect() { return {Kind::Reflect, 0.0}; }
  static PadMode edge() { return {Kind::Edge, 0.0}; }
};

template <typename Scalar>
BasicImage<Scalar> pad(const BasicImage<Scalar>& img, const Shape& before, const Shape& after,
                       PadMode mode) {
  const Shape& shape = img.shape();
  const std::size_t r = shape.size();
  if (before.size() != r || after.size() != r)
    throw Error(Errc::InvalidArgument, "pad counts must have one entry per axis");

  // Per-axis lookup: output coordinate -> input coordinate, or -1 for fill.
  std::vector<std::vector<std::ptrdiff_t>> lut(r);
  Shape out_shape(r);
  for (std::size_t a = 0; a < r; ++a) {
    const std::size_t n = shape[a];
    out_shape[a] = before[a] + n + after[a];
    if (mode.kind == PadMode::Kind::Reflect && n == 1 && (before[a] || after[a]))
      throw Error(Errc::ReflectTooSmall, std::string("cannot reflect-pad axis ") +
                                              axis_label(img.axes()[a]) + " of extent 1");
    lut[a].resize(out_shape[a]);
    for (std::size_t o = 0; o < out_shape[a]; ++o) {
      const auto i = static_cast<std::ptrdiff_t>(o) - static_cast<std::ptrdiff_t>(before[a]);
      if (i >= 0 && i < static_cast<std::ptrdiff_t>(n)) {
        lut[a][o] = i;
      } else if (mode.kind == PadMode::Kind::Constant) {
        lut[a][o] = -1;
      } else if (mode.kind == PadMode::Kind::Edge) {
        lut[a][o] = i < 0 ? 0 : static_cast<std::ptrdiff_t>(n) - 1;
      } else {
        lut[a][o] = static_cast<std::ptrdiff_t>(detail::mirror_index(i, n));
      }
    }
  }

  BasicImage<Scalar> out(img.axes(), out_shape);
  const Shape strides = img.strides();
  const auto fill = static_cast<Scalar>(mode.value);
  auto src = img.data();
  auto dst = out.data();
  const std::size_t last = r - 1;
  std::size_t o = 0;
  detail::for_each_row(out_shape, [&](const Shape& idx) {
    std::ptrdiff_t base = 0;
    bool filled = false;
    for (std::size_t a = 0; a < last; ++a) {
      const std::ptrdiff_t s = lut[a][idx[a]];
      if (s < 0) {
        filled = true;
        break;
      }
      base += s * static_cast<std::ptrdiff_t>(strides[a]);
    }
    for (std::size_t x = 0; x < out_shape[last]; ++x, ++o) {
      const std::ptrdiff_t s = lut[last][x];
      dst[o] = (filled || s < 0) ? fill : src[std::size_t(base + s)];
    }
  });
  out.set_pixel_size(img.pixel_size());
  return out;
}

/// Inserts singleton axes so the result carries every axis in `required`
/// (and every axis it already had). Data is unchanged.
template <typename Scalar>
BasicImage<Scalar> ensure_axes(const BasicImage<Scalar>& img, const AxisList& required) {
  AxisList axes;
  Shape shape;
  for (Axis a : kCanonicalAxes) {
    const bool want = std::find(required.begin(), required.end(), a) != required.end();
    if (auto i = img.axis_index(a)) {
      axes.push_back(a);
      shape.push_back(img.shape()[*i]);
    } else if (want) {
      axes.push_back(a);
      shape.push_back(1);
    }
  }
  BasicImage<Scalar> out(std::move(axes), std::move(shape), img.buffer());
  out.set_pixel_size(img.pixel_size());
  return out;
}

/// Removes `axis` when it is present with extent 1.
template <typename Scalar>
BasicImage<Scalar> squeeze_axis(const BasicImage<Scalar>& img, Axis axis) {
  auto i = img.axis_index(axis);
  if (!i || img.shape()[*i] != 1) return img;
  AxisList axes = img.axes();
  Shape shape = img.shape();
  axes.erase(axes.begin() + std::ptrdiff_t(*i));
  shape.erase(shape.begin() + std::ptrdiff_t(*i));
  BasicImage<Scalar> out(std::move(axes), std::move(shape), img.buffer());
  out.set_pixel_size(img.pixel_size());
  return out;
}

/// The hyperplane at `index` along `axis`, with that axis removed.
template <typename Scalar>
BasicImage<Scalar> slice(const BasicImage<Scalar>& img, Axis axis, std::size_t index) {
  auto k = img.axis_index(axis);
  if (!k) throw Error(Errc::InvalidArgument, std::string("slice: no axis ") + axis_label(axis));
  if (axis == Axis::Y || axis == Axis::X)
    throw Error(Errc::InvalidArgument, "slice: cannot drop Y or X");
  const Shape& shape = img.shape();
  if (index >= shape[*k]) throw Error(Errc::RoiOutOfBounds, "slice index out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < *k; ++a) outer *= shape[a];
  for (std::size_t a = *k + 1; a < shape.size(); ++a) inner *= shape[a];

  AxisList axes = img.axes();
  Shape out_shape = shape;
  axes.erase(axes.begin() + std::ptrdiff_t(*k));
  out_shape.erase(out_shape.begin() + std::ptrdiff_t(*k));
  std::vector<Scalar> buf(outer * inner);
  auto src = img.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src.begin() + std::ptrdiff_t((o * shape[*k] + index) * inner), inner,
                buf.begin() + std::ptrdiff_t(o * inner));
  BasicImage<Scalar> out(std::move(axes), std::move(out_shape), std::move(buf));
  out.set_pixel_size(img.pixel_size());
  return out;
}

/// Stacks equally shaped images along a new `axis` (absent from the parts).
template <typename Scalar>
BasicImage<Scalar> stack(std::span<const BasicImage<Scalar>> parts, Axis axis) {
  if (parts.empty()) throw Error(Errc::InvalidArgument, "stack: no parts");
  const auto& first = parts.front();
  if (first.has_axis(axis))
    throw Error(Errc::InvalidArgument, std::string("stack: axis already present: ") + axis_label(axis));
  for (const auto& p : parts)
    if (!p.same_layout(first)) throw Error(Errc::ShapeMismatch, "stack: parts differ in layout");

  AxisList axes = first.axes();
  Shape shape = first.shape();
  auto pos = std::upper_bound(axes.begin(), axes.end(), axis);
  const auto k = std::size_t(pos - axes.begin());
  axes.insert(pos, axis);
  shape.insert(shape.begin() + std::ptrdiff_t(k), parts.size());

  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < k; ++a) outer *= first.shape()[a];
  for (std::size_t a = k; a < first.rank(); ++a) inner *= first.shape()[a];
  std::vector<Scalar> buf(outer * inner * parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto src = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.begin() + std::ptrdiff_t(o * inner), inner,
                  buf.begin() + std::ptrdiff_t((o * parts.size() + p) * inner));
  }
  BasicImage<Scalar> out(std::move(axes), std::move(shape), std::move(buf));
  out.set_pixel_size(first.pixel_size());
  return out;
}

template <typename Scalar>
BasicImage<Scalar> stack(const std::vector<BasicImage<Scalar>>& parts, Axis axis) {
  return stack(std::span<const BasicImage<Scalar>>(parts), axis);
}

}  // namespace mmv
