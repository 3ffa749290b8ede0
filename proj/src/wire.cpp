#include "mmv/wire.hpp"

#include <cerrno>
#include <cstring>
#include <poll.h>
#include <unistd.h>

#include "json_io.hpp"
#include "mmv/error.hpp"

namespace mmv {

using Clock = std::chrono::steady_clock;

namespace {

[[noreturn]] void protocol_error(const std::string& what) { throw Error(Errc::ExternalProtocolError, what); }

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto e : shape) {
    if (e != 0 && n > (std::uint64_t(1) << 40) / e) protocol_error("frame shape too large");
    n *= e;
  }
  return n;
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : int(std::min<long long>(left, 1 << 30));
}

void wait_ready(int fd, short events, Clock::time_point deadline, const char* what) {
  for (;;) {
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r > 0) return;
    if (r == 0) protocol_error(std::string("timed out ") + what);
    if (errno != EINTR) protocol_error(std::string("poll failed ") + what + ": " + std::strerror(errno));
  }
}

void read_exact(int fd, char* buf, std::size_t n, Clock::time_point deadline) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r > 0) {
      got += std::size_t(r);
    } else if (r == 0) {
      protocol_error("peer closed the stream (" + std::to_string(got) + "/" + std::to_string(n) + " bytes read)");
    } else if (errno == EAGAIN || errno == EWOULDBLOCK) {
      wait_ready(fd, POLLIN, deadline, "waiting for frame");
    } else if (errno != EINTR) {
      protocol_error(std::string("read failed: ") + std::strerror(errno));
    }
  }
}

}  // namespace

bool frame_has_payload(std::string_view type) noexcept { return type == "infer" || type == "result"; }

std::string encode_header(const FrameHeader& h) {
  Json j;
  j["v"] = h.v;
  j["type"] = h.type;
  j["dtype"] = h.dtype;
  j["shape"] = h.shape;
  if (h.note) j["note"] = *h.note;
  if (h.max_batch) j["max_batch"] = *h.max_batch;
  if (h.in_channels) j["in_channels"] = *h.in_channels;
  if (h.out_channels) j["out_channels"] = *h.out_channels;
  if (h.spatial_rank) j["spatial_rank"] = *h.spatial_rank;
  return j.dump();
}

FrameHeader decode_header(std::string_view text) {
  FrameHeader h;
  try {
    const Json j = Json::parse(text);
    if (!j.is_object()) protocol_error("frame header is not a JSON object");
    h.v = j.at("v").get<int>();
    h.type = j.at("type").get<std::string>();
    h.dtype = j.value("dtype", std::string("f32"));
    h.shape = j.value("shape", std::vector<std::uint64_t>{});
    if (j.contains("note")) h.note = j.at("note").get<std::string>();
    if (j.contains("max_batch")) h.max_batch = j.at("max_batch").get<std::uint64_t>();
    if (j.contains("in_channels")) h.in_channels = j.at("in_channels").get<std::uint64_t>();
    if (j.contains("out_channels")) h.out_channels = j.at("out_channels").get<std::uint64_t>();
    if (j.contains("spatial_rank")) h.spatial_rank = j.at("spatial_rank").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    protocol_error(std::string("bad frame header: ") + e.what());
  }
  if (h.type != "hello" && h.type != "infer" && h.type != "result" && h.type != "error")
    protocol_error("unknown frame type '" + h.type + "'");
  if (frame_has_payload(h.type) && h.dtype != "f32") protocol_error("unsupported dtype '" + h.dtype + "'");
  return h;
}

std::string encode_frame(const Frame& f) {
  const std::string header = encode_header(f.header);
  std::string out(kFrameMagic, 4);
  const auto len = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(char((len >> (8 * i)) & 0xff));
  out += header;
  if (frame_has_payload(f.header.type)) {
    if (f.payload.size() != element_count(f.header.shape))
      throw Error(Errc::InvalidArgument, "frame payload does not match its shape");
    out.append(reinterpret_cast<const char*>(f.payload.data()), f.payload.size() * sizeof(float));
  }
  return out;
}

namespace {

std::uint32_t header_length(const char* p) {
  if (std::memcmp(p, kFrameMagic, 4) != 0) protocol_error("bad frame magic");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t(static_cast<unsigned char>(p[4 + i])) << (8 * i);
  if (len == 0 || len > kMaxHeaderBytes) protocol_error("frame header length " + std::to_string(len) + " out of range");
  return len;
}

}  // namespace

Frame decode_frame(std::string_view bytes) {
  if (bytes.size() < 8) protocol_error("frame shorter than its prefix");
  const std::uint32_t len = header_length(bytes.data());
  if (bytes.size() < 8 + std::size_t(len)) protocol_error("frame header truncated");
  Frame f;
  f.header = decode_header(bytes.substr(8, len));
  const std::size_t want = frame_has_payload(f.header.type) ? element_count(f.header.shape) * 4 : 0;
  if (bytes.size() - 8 - len != want) protocol_error("frame payload length does not match shape");
  f.payload.resize(want / 4);
  std::memcpy(f.payload.data(), bytes.data() + 8 + len, want);
  return f;
}

void write_frame(int fd, const Frame& f, std::chrono::milliseconds timeout) {
  const std::string bytes = encode_frame(f);
  const auto deadline = Clock::now() + timeout;
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + sent, bytes.size() - sent);
    if (w > 0) {
      sent += std::size_t(w);
    } else if (w < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      wait_ready(fd, POLLOUT, deadline, "writing frame");
    } else if (w < 0 && errno == EINTR) {
      continue;
    } else {
      protocol_error(std::string("write failed: ") + (w < 0 ? std::strerror(errno) : "short write"));
    }
  }
}

Frame read_frame(int fd, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  char prefix[8];
  read_exact(fd, prefix, 8, deadline);
  const std::uint32_t len = header_length(prefix);
  std::string header(len, '\0');
  read_exact(fd, header.data(), len, deadline);
  Frame f;
  f.header = decode_header(header);
  if (frame_has_payload(f.header.type)) {
    f.payload.resize(element_count(f.header.shape));
    read_exact(fd, reinterpret_cast<char*>(f.payload.data()), f.payload.size() * 4, deadline);
  }
  return f;
}

}  // namespace mmv
