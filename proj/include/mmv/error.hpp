#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmv {

/// Every failure the library reports carries one of these codes.
enum class Errc {
  InvalidArgument,
  RoiOutOfBounds,
  ReflectTooSmall,
  IoError,
  BadMagic,
  UnsupportedVersion,
  BadHeader,
  TruncatedPayload,
  UnsupportedTiff,
  EmptyImage,
  ZeroVariance,
  NoZAxis,
  TooFewStainPixels,
  DegenerateStains,
  UnpairedSource,
  DuplicateId,
  EmptyDataset,
  AlreadySplit,
  TransformError,
  AllExcluded,
  ExecutorFailure,
  ShapeMismatch,
  ChannelMismatch,
  ExternalProtocolError,
  SpawnFailure,
  HelloMismatch,
  TooSmallForWindow,
  NonBinaryInput,
  ParseError,
  UnknownKey,
  ValidationError,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  Errc code() const noexcept { return code_; }
  /// Window, batch, or line index the failure refers to, when there is one.
  std::optional<std::size_t> index() const noexcept { return index_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::optional<std::size_t> index_;
  std::string detail_;
};

}  // namespace mmv
