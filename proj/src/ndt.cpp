#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmv/io.hpp"

namespace mmv {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "NDT payload I/O assumes a little-endian host");

std::string_view dtype_name(DType d) noexcept {
  switch (d) {
    case DType::F32: return "f32";
    case DType::U8: return "u8";
    case DType::U16: return "u16";
  }
  return "?";
}

std::size_t dtype_size(DType d) noexcept {
  switch (d) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::U16: return 2;
  }
  return 0;
}

namespace {

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string header_bytes(DType dtype, const AxisList& axes, const Shape& shape) {
  std::string out(kNdtMagic, 4);
  put_le<std::uint16_t>(out, kNdtVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(axes.size()));
  for (Axis a : axes) out.push_back(axis_label(a));
  for (std::size_t e : shape) put_le<std::uint64_t>(out, e);
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  return bytes;
}

NdtHeader parse_header(const std::string& bytes, const fs::path& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(p, kNdtMagic, 4) != 0)
    throw Error(Errc::BadMagic, path.string());
  if (bytes.size() < 8) throw Error(Errc::BadHeader, "header truncated: " + path.string());
  NdtHeader h;
  h.version = get_le<std::uint16_t>(p + 4);
  if (h.version != kNdtVersion)
    throw Error(Errc::UnsupportedVersion, "version " + std::to_string(h.version) + " in " + path.string());
  const std::uint8_t code = p[6];
  if (code > 2) throw Error(Errc::BadHeader, "dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  const std::size_t n = p[7];
  if (n < 2 || n > 5) throw Error(Errc::BadHeader, "axis count " + std::to_string(n));
  if (bytes.size() < 8 + n * 9) throw Error(Errc::BadHeader, "header truncated: " + path.string());
  try {
    h.axes = parse_axes(std::string_view(bytes.data() + 8, n));
  } catch (const Error& e) {
    throw Error(Errc::BadHeader, e.detail());
  }
  if (h.axes[n - 2] != Axis::Y || h.axes[n - 1] != Axis::X)
    throw Error(Errc::BadHeader, "Y and X axes are required");
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = get_le<std::uint64_t>(p + 8 + n + 8 * i);
    if (e == 0) throw Error(Errc::BadHeader, "zero extent");
    if (e > (std::uint64_t(1) << 40)) throw Error(Errc::BadHeader, "implausible extent");
    h.shape.push_back(std::size_t(e));
  }
  return h;
}

template <typename T>
std::vector<float> decode_payload(const char* p, std::size_t count) {
  std::vector<T> raw(count);
  std::memcpy(raw.data(), p, count * sizeof(T));
  return std::vector<float>(raw.begin(), raw.end());
}

}  // namespace

template <typename Scalar>
void write_ndt(const BasicImage<Scalar>& img, const fs::path& path) {
  std::string bytes = header_bytes(dtype_of<Scalar>(), img.axes(), img.shape());
  const auto* raw = reinterpret_cast<const char*>(img.data().data());
  bytes.append(raw, img.size() * sizeof(Scalar));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot create " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  out.close();
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

template void write_ndt(const Image&, const fs::path&);
template void write_ndt(const ImageU8&, const fs::path&);
template void write_ndt(const ImageU16&, const fs::path&);

std::string encode_ndt(const Image& img) {
  std::string bytes = header_bytes(DType::F32, img.axes(), img.shape());
  bytes.append(reinterpret_cast<const char*>(img.data().data()), img.size() * sizeof(float));
  return bytes;
}

NdtHeader read_ndt_header(const fs::path& path) { return parse_header(slurp(path), path); }

Image read_ndt(const fs::path& path) {
  const std::string bytes = slurp(path);
  NdtHeader h = parse_header(bytes, path);
  const std::size_t start = h.header_bytes();
  const std::size_t want = h.payload_bytes();
  const std::size_t have = bytes.size() - start;
  if (have < want)
    throw Error(Errc::TruncatedPayload, path.string() + ": payload has " + std::to_string(have) +
                                            " bytes, header needs " + std::to_string(want));
  if (have > want)
    throw Error(Errc::BadHeader, path.string() + ": " + std::to_string(have - want) +
                                     " trailing bytes after payload");
  const std::size_t count = shape_product(h.shape);
  const char* p = bytes.data() + start;
  std::vector<float> data;
  switch (h.dtype) {
    case DType::F32:
      data.resize(count);
      std::memcpy(data.data(), p, want);
      break;
    case DType::U8: data = decode_payload<std::uint8_t>(p, count); break;
    case DType::U16: data = decode_payload<std::uint16_t>(p, count); break;
  }
  return Image(std::move(h.axes), std::move(h.shape), std::move(data));
}

Image read_image(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".tif" || ext == ".tiff") return read_tiff_2d(path);
  return read_ndt(path);
}

}  // namespace mmv
