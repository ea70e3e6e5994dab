#include "synmix/error.hpp"

#include <fmt/format.h>

namespace synmix {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::DegenerateExtent: return "DegenerateExtent";
    case Errc::ZeroDimension: return "ZeroDimension";
    case Errc::EmptyCrop: return "EmptyCrop";
    case Errc::UnmappedClass: return "UnmappedClass";
    case Errc::EmptyManifest: return "EmptyManifest";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InsufficientSyntheticPool: return "InsufficientSyntheticPool";
    case Errc::InsufficientRealPool: return "InsufficientRealPool";
    case Errc::IoFailure: return "IoFailure";
    case Errc::NoGroundTruth: return "NoGroundTruth";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::DegenerateSamples: return "DegenerateSamples";
    case Errc::OneSidedSamples: return "OneSidedSamples";
    case Errc::ModelFileInvalid: return "ModelFileInvalid";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InsufficientPatches: return "InsufficientPatches";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::RangeViolation: return "RangeViolation";
    case Errc::SampleTooSmall: return "SampleTooSmall";
    case Errc::ConstantSample: return "ConstantSample";
    case Errc::EmptySample: return "EmptySample";
    case Errc::InsufficientGroups: return "InsufficientGroups";
    case Errc::ZeroWithinVariance: return "ZeroWithinVariance";
    case Errc::MissingCell: return "MissingCell";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::AdapterTimeout: return "AdapterTimeout";
    case Errc::AdapterFailure: return "AdapterFailure";
    case Errc::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

int exit_status(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigInvalid:
    case Errc::InvalidSpec:
      return 2;
    case Errc::AdapterTimeout:
    case Errc::AdapterFailure:
    case Errc::SchemaViolation:
      return 3;
    default:
      return 4;
  }
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", errc_name(code), what)), code_(code) {}

}  // namespace synmix
