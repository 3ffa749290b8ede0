#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace mmv {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Streams a file through SHA-256. Throws IoError when unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  /// Length-prefixed field, so concatenations stay unambiguous.
  Sha256& field(std::string_view bytes);
  std::string hex();

 private:
  void* ctx_;
};

/// Platform-stable 64-bit key of (seed, text): FNV-1a followed by splitmix64.
std::uint64_t keyed_hash64(std::uint64_t seed, std::string_view text) noexcept;

}  // namespace mmv
