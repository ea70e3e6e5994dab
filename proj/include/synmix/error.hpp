#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace synmix {

enum class Errc {
  // annotation
  MalformedLine,
  CoordinateOutOfRange,
  UnknownClass,
  DegenerateExtent,
  ZeroDimension,
  EmptyCrop,
  UnmappedClass,
  // sampler
  EmptyManifest,
  DuplicateId,
  InvalidSpec,
  InsufficientSyntheticPool,
  InsufficientRealPool,
  IoFailure,
  // detection evaluation
  NoGroundTruth,
  // image quality
  ImageTooSmall,
  DegenerateSamples,
  OneSidedSamples,
  ModelFileInvalid,
  DimensionMismatch,
  InsufficientPatches,
  SingularCovariance,
  MalformedRow,
  RangeViolation,
  // statistics
  SampleTooSmall,
  ConstantSample,
  EmptySample,
  InsufficientGroups,
  ZeroWithinVariance,
  // report
  MissingCell,
  EmptyGroup,
  // orchestration
  ConfigInvalid,
  AdapterTimeout,
  AdapterFailure,
  SchemaViolation,
};

std::string_view errc_name(Errc code) noexcept;

/// Process exit status for the CLI: 2 config, 3 adapter, 4 data.
int exit_status(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace synmix
