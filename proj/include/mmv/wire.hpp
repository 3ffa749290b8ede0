#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmv {

inline constexpr char kFrameMagic[4] = {'M', 'M', 'V', 'X'};
inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxHeaderBytes = 1u << 20;

/// Frame header. Serialized as compact JSON with sorted keys; optional
/// fields are omitted when unset.
struct FrameHeader {
  int v = kProtocolVersion;
  std::string type;  ///< hello | infer | result | error
  std::string dtype = "f32";
  std::vector<std::uint64_t> shape;
  std::optional<std::string> note;
  // hello only
  std::optional<std::uint64_t> max_batch;
  std::optional<std::uint64_t> in_channels;
  std::optional<std::uint64_t> out_channels;
  std::optional<std::uint64_t> spatial_rank;

  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

/// "MMVX", u32 LE header length, JSON header, then for infer/result frames
/// 4 * product(shape) bytes of little-endian f32.
struct Frame {
  FrameHeader header;
  std::vector<float> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

bool frame_has_payload(std::string_view type) noexcept;

std::string encode_header(const FrameHeader& h);
FrameHeader decode_header(std::string_view json);

std::string encode_frame(const Frame& f);
/// Decodes one complete frame; `bytes` must hold exactly that frame.
Frame decode_frame(std::string_view bytes);

/// Blocking frame I/O on file descriptors. A read that does not complete
/// within `timeout` raises ExternalProtocolError, as does EOF or a
/// malformed frame.
void write_frame(int fd, const Frame& f, std::chrono::milliseconds timeout);
Frame read_frame(int fd, std::chrono::milliseconds timeout);

}  // namespace mmv
