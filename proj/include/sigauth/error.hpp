#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sigauth {

enum class ErrorCode {
  InvalidArgument,
  // sample IO
  FileNotFound,
  MalformedRecord,
  ChannelCount,
  Io,
  // features / quality
  QualityFailure,
  // mapreduce
  SplitTooFine,
  EmptyPartition,
  DimensionMismatch,
  InsufficientSamples,
  MapperFailure,
  // pca
  DegenerateFeature,
  NonSymmetric,
  // training
  OneClass,
  EmptyData,
  PcaMismatch,
  // auth / store
  UnknownUser,
  CorruptRecord,
  InvalidPolicy,
  // eval
  NoGenuineProbes,
  NoForgedProbes,
  SingleClassProbes,
  WorkloadMismatch,
  OverlappingSplit,
  MissingBaseline,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::FileNotFound: return "FILE_NOT_FOUND";
    case ErrorCode::MalformedRecord: return "MALFORMED_RECORD";
    case ErrorCode::ChannelCount: return "CHANNEL_COUNT";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::QualityFailure: return "QUALITY_FAILURE";
    case ErrorCode::SplitTooFine: return "SPLIT_TOO_FINE";
    case ErrorCode::EmptyPartition: return "EMPTY_PARTITION";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::InsufficientSamples: return "INSUFFICIENT_SAMPLES";
    case ErrorCode::MapperFailure: return "MAPPER_FAILURE";
    case ErrorCode::DegenerateFeature: return "DEGENERATE_FEATURE";
    case ErrorCode::NonSymmetric: return "NON_SYMMETRIC";
    case ErrorCode::OneClass: return "ONE_CLASS";
    case ErrorCode::EmptyData: return "EMPTY_DATA";
    case ErrorCode::PcaMismatch: return "PCA_MISMATCH";
    case ErrorCode::UnknownUser: return "UNKNOWN_USER";
    case ErrorCode::CorruptRecord: return "CORRUPT_RECORD";
    case ErrorCode::InvalidPolicy: return "INVALID_POLICY";
    case ErrorCode::NoGenuineProbes: return "NO_GENUINE_PROBES";
    case ErrorCode::NoForgedProbes: return "NO_FORGED_PROBES";
    case ErrorCode::SingleClassProbes: return "SINGLE_CLASS_PROBES";
    case ErrorCode::WorkloadMismatch: return "WORKLOAD_MISMATCH";
    case ErrorCode::OverlappingSplit: return "OVERLAPPING_SPLIT";
    case ErrorCode::MissingBaseline: return "MISSING_BASELINE";
  }
  return "UNKNOWN";
}

// All library failures are reported through this exception. `index` carries
// the offending row / column / partition / sample index where one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace sigauth
