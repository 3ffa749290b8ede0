#include <fstream>
#include <iterator>
#include <map>

#include "mmv/io.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kTileByteCounts = 325,
  kSampleFormat = 339,
};

[[noreturn]] void unsupported(const std::string& why) { throw Error(Errc::UnsupportedTiff, why); }

class TiffFile {
 public:
  explicit TiffFile(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (bytes_.size() < 8) unsupported("file too short for a TIFF header");
    if (bytes_[0] == 'I' && bytes_[1] == 'I') {
      big_endian_ = false;
    } else if (bytes_[0] == 'M' && bytes_[1] == 'M') {
      big_endian_ = true;
    } else {
      unsupported("missing byte-order mark");
    }
    const auto magic = u16(2);
    if (magic == 43) unsupported("BigTIFF is not supported");
    if (magic != 42) unsupported("bad TIFF magic " + std::to_string(magic));
    parse_ifd(u32(4));
  }

  bool big_endian() const { return big_endian_; }
  bool has(std::uint16_t tag) const { return tags_.count(tag) != 0; }

  const std::vector<std::uint32_t>& values(std::uint16_t tag) const {
    auto it = tags_.find(tag);
    if (it == tags_.end()) unsupported("missing required tag " + std::to_string(tag));
    return it->second;
  }
  std::uint32_t scalar(std::uint16_t tag, std::optional<std::uint32_t> fallback = std::nullopt) const {
    auto it = tags_.find(tag);
    if (it == tags_.end()) {
      if (fallback) return *fallback;
      unsupported("missing required tag " + std::to_string(tag));
    }
    if (it->second.empty()) unsupported("empty tag " + std::to_string(tag));
    return it->second.front();
  }

  std::size_t size() const { return bytes_.size(); }
  std::uint16_t u16(std::size_t off) const {
    check(off, 2);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + off);
    return big_endian_ ? std::uint16_t(p[0] << 8 | p[1]) : std::uint16_t(p[1] << 8 | p[0]);
  }
  std::uint32_t u32(std::size_t off) const {
    check(off, 4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + off);
    return big_endian_ ? std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3]
                       : std::uint32_t(p[3]) << 24 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[1]) << 8 | p[0];
  }
  std::uint8_t u8(std::size_t off) const {
    check(off, 1);
    return static_cast<std::uint8_t>(bytes_[off]);
  }
  void check(std::size_t off, std::size_t len) const {
    if (off > bytes_.size() || len > bytes_.size() - off) unsupported("offset beyond end of file");
  }

 private:
  void parse_ifd(std::uint32_t offset) {
    const std::uint16_t count = u16(offset);
    for (std::uint16_t i = 0; i < count; ++i) {
      const std::size_t e = offset + 2 + std::size_t(i) * 12;
      const std::uint16_t tag = u16(e);
      const std::uint16_t type = u16(e + 2);
      const std::uint32_t n = u32(e + 4);
      std::size_t elem = 0;
      switch (type) {
        case 1: case 2: case 6: case 7: elem = 1; break;  // BYTE, ASCII, SBYTE, UNDEFINED
        case 3: case 8: elem = 2; break;                  // SHORT, SSHORT
        case 4: case 9: elem = 4; break;                  // LONG, SLONG
        default: elem = 0; break;                         // rationals etc. are not read
      }
      if (elem == 0 || (type != 1 && type != 3 && type != 4)) continue;
      if (n > (1u << 24)) unsupported("tag count too large");
      const std::size_t total = elem * n;
      const std::size_t data_off = total <= 4 ? e + 8 : u32(e + 8);
      check(data_off, total);
      std::vector<std::uint32_t> vals(n);
      for (std::uint32_t k = 0; k < n; ++k) {
        const std::size_t at = data_off + k * elem;
        vals[k] = elem == 1 ? u8(at) : elem == 2 ? u16(at) : u32(at);
      }
      tags_[tag] = std::move(vals);
    }
    const std::uint32_t next = u32(offset + 2 + std::size_t(count) * 12);
    if (next != 0) unsupported("multi-page TIFF is not supported");
  }

  std::string bytes_;
  bool big_endian_ = false;
  std::map<std::uint16_t, std::vector<std::uint32_t>> tags_;
};

struct Layout {
  std::uint32_t width, height, spp, bps;
  bool tiled;
};

Layout validate(const TiffFile& t) {
  Layout l{};
  l.width = t.scalar(kImageWidth);
  l.height = t.scalar(kImageLength);
  if (l.width == 0 || l.height == 0) unsupported("zero image dimension");
  l.spp = t.scalar(kSamplesPerPixel, 1);
  if (l.spp != 1 && l.spp != 3) unsupported("samples per pixel must be 1 or 3, got " + std::to_string(l.spp));
  const auto& bps = t.values(kBitsPerSample);
  l.bps = bps.front();
  for (auto b : bps)
    if (b != l.bps) unsupported("mixed bits per sample");
  if (l.bps != 8 && l.bps != 16) unsupported("bits per sample must be 8 or 16, got " + std::to_string(l.bps));
  if (t.scalar(kCompression, 1) != 1) unsupported("compressed TIFF is not supported");
  const auto photometric = t.scalar(kPhotometric);
  if (l.spp == 1 && photometric != 1) unsupported("grayscale must be BlackIsZero");
  if (l.spp == 3 && photometric != 2) unsupported("3-sample image must be RGB");
  if (t.scalar(kPlanarConfig, 1) != 1) unsupported("planar configuration must be chunky");
  if (t.has(kSampleFormat))
    for (auto f : t.values(kSampleFormat))
      if (f != 1) unsupported("sample format must be unsigned integer");
  l.tiled = t.has(kTileOffsets);
  return l;
}

}  // namespace

TiffInfo read_tiff_info(const fs::path& path) {
  TiffFile t(path);
  const Layout l = validate(t);
  return TiffInfo{l.width, l.height, std::uint16_t(l.bps), std::uint16_t(l.spp), l.tiled, t.big_endian()};
}

Image read_tiff_2d(const fs::path& path) {
  TiffFile t(path);
  const Layout l = validate(t);
  const std::size_t bytes_per_sample = l.bps / 8;
  const std::size_t w = l.width, h = l.height, spp = l.spp;
  // Interleaved samples, row-major: (y, x, s).
  std::vector<float> interleaved(w * h * spp);

  auto sample = [&](std::size_t off) -> float {
    return bytes_per_sample == 1 ? float(t.u8(off)) : float(t.u16(off));
  };

  if (!l.tiled) {
    const std::size_t rps = std::min<std::size_t>(t.scalar(kRowsPerStrip, l.height), h);
    const auto& offsets = t.values(kStripOffsets);
    const std::size_t strips = (h + rps - 1) / rps;
    if (offsets.size() < strips) unsupported("too few strip offsets");
    const std::size_t row_bytes = w * spp * bytes_per_sample;
    for (std::size_t s = 0; s < strips; ++s) {
      const std::size_t y0 = s * rps;
      const std::size_t rows = std::min(rps, h - y0);
      t.check(offsets[s], rows * row_bytes);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < w * spp; ++i)
          interleaved[(y0 + r) * w * spp + i] = sample(offsets[s] + r * row_bytes + i * bytes_per_sample);
    }
  } else {
    const std::size_t tw = t.scalar(kTileWidth), th = t.scalar(kTileLength);
    if (tw == 0 || th == 0) unsupported("zero tile dimension");
    const auto& offsets = t.values(kTileOffsets);
    const std::size_t across = (w + tw - 1) / tw, down = (h + th - 1) / th;
    if (offsets.size() < across * down) unsupported("too few tile offsets");
    const std::size_t tile_row_bytes = tw * spp * bytes_per_sample;
    for (std::size_t ty = 0; ty < down; ++ty)
      for (std::size_t tx = 0; tx < across; ++tx) {
        const std::size_t off = offsets[ty * across + tx];
        t.check(off, th * tile_row_bytes);
        for (std::size_t r = 0; r < th && ty * th + r < h; ++r)
          for (std::size_t c = 0; c < tw && tx * tw + c < w; ++c)
            for (std::size_t s = 0; s < spp; ++s)
              interleaved[((ty * th + r) * w + tx * tw + c) * spp + s] =
                  sample(off + r * tile_row_bytes + (c * spp + s) * bytes_per_sample);
      }
  }

  if (spp == 1) return Image({Axis::Y, Axis::X}, {h, w}, std::move(interleaved));
  std::vector<float> planar(interleaved.size());
  for (std::size_t p = 0; p < w * h; ++p)
    for (std::size_t s = 0; s < spp; ++s) planar[s * w * h + p] = interleaved[p * spp + s];
  return Image({Axis::C, Axis::Y, Axis::X}, {spp, h, w}, std::move(planar));
}

}  // namespace mmv
