#include "mmv/error.hpp"

namespace mmv {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RoiOutOfBounds: return "RoiOutOfBounds";
    case Errc::ReflectTooSmall: return "ReflectTooSmall";
    case Errc::IoError: return "IoError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::BadHeader: return "BadHeader";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::UnsupportedTiff: return "UnsupportedTiff";
    case Errc::EmptyImage: return "EmptyImage";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::NoZAxis: return "NoZAxis";
    case Errc::TooFewStainPixels: return "TooFewStainPixels";
    case Errc::DegenerateStains: return "DegenerateStains";
    case Errc::UnpairedSource: return "UnpairedSource";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::AlreadySplit: return "AlreadySplit";
    case Errc::TransformError: return "TransformError";
    case Errc::AllExcluded: return "AllExcluded";
    case Errc::ExecutorFailure: return "ExecutorFailure";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ChannelMismatch: return "ChannelMismatch";
    case Errc::ExternalProtocolError: return "ExternalProtocolError";
    case Errc::SpawnFailure: return "SpawnFailure";
    case Errc::HelloMismatch: return "HelloMismatch";
    case Errc::TooSmallForWindow: return "TooSmallForWindow";
    case Errc::NonBinaryInput: return "NonBinaryInput";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> index)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code),
      index_(index),
      detail_(message) {}

}  // namespace mmv
