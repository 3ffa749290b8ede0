#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mmv/ndimage.hpp"

namespace mmv {

/// Element type codes stored in NDT headers.
enum class DType : std::uint8_t { F32 = 0, U8 = 1, U16 = 2 };

std::string_view dtype_name(DType d) noexcept;
std::size_t dtype_size(DType d) noexcept;

template <typename Scalar>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::F32; }
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::U8; }
template <> constexpr DType dtype_of<std::uint16_t>() { return DType::U16; }

inline constexpr char kNdtMagic[4] = {'M', 'M', 'V', 'T'};
inline constexpr std::uint16_t kNdtVersion = 1;

/// NDT layout: "MMVT", u16 version, u8 dtype, u8 axis count, one label byte
/// per axis, u64 extents, then the raw row-major payload. All little-endian.
struct NdtHeader {
  std::uint16_t version = kNdtVersion;
  DType dtype = DType::F32;
  AxisList axes;
  Shape shape;

  std::size_t header_bytes() const noexcept { return 8 + axes.size() * 9; }
  std::size_t payload_bytes() const noexcept { return shape_product(shape) * dtype_size(dtype); }
};

template <typename Scalar>
void write_ndt(const BasicImage<Scalar>& img, const std::filesystem::path& path);

extern template void write_ndt(const Image&, const std::filesystem::path&);
extern template void write_ndt(const ImageU8&, const std::filesystem::path&);
extern template void write_ndt(const ImageU16&, const std::filesystem::path&);

/// Reads an NDT file; integer payloads are converted to float by value.
Image read_ndt(const std::filesystem::path& path);
NdtHeader read_ndt_header(const std::filesystem::path& path);

/// Serialized NDT bytes for an image (used for hashing and atomic writes).
std::string encode_ndt(const Image& img);

struct TiffInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint16_t samples_per_pixel = 0;
  bool tiled = false;
  bool big_endian = false;
};

/// Baseline uncompressed single-page TIFF, 8/16-bit grayscale or RGB,
/// stripped or tiled. Grayscale yields YX, RGB yields CYX with C=3.
Image read_tiff_2d(const std::filesystem::path& path);
TiffInfo read_tiff_info(const std::filesystem::path& path);

/// Dispatches on extension: .ndt, .tif/.tiff.
Image read_image(const std::filesystem::path& path);

}  // namespace mmv
