#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tta {

enum class ErrorKind {
  MissingField,
  DuplicateId,
  UnreadableFile,
  UnsupportedFormat,
  CorruptFile,
  AudioTooShort,
  ProviderFailure,
  EmptyTranscript,
  ShapeMismatch,
  UnknownGroup,
  NonFiniteLoss,
  InvalidConfig,
  EmptyReference,
  EmptyList,
  TooFewPairs,
  AllZeroDifferences,
  SpeakerSetMismatch,
  TooFewFrames,
  DimensionMismatch,
  SingularCovariance,
  TooFewPoints,
  LengthMismatch,
  ZeroVariance,
  InvalidP,
  BadCheckpoint,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::AudioTooShort: return "AudioTooShort";
    case ErrorKind::ProviderFailure: return "ProviderFailure";
    case ErrorKind::EmptyTranscript: return "EmptyTranscript";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UnknownGroup: return "UnknownGroup";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorKind::SpeakerSetMismatch: return "SpeakerSetMismatch";
    case ErrorKind::TooFewFrames: return "TooFewFrames";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tta
