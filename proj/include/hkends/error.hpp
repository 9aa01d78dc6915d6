#pragma once

#include <stdexcept>
#include <string>

namespace hkends {

enum class ErrorKind {
  InvalidArgument,
  OverlappingEnds,
  EmptyEnds,
  ResolutionTooCoarse,
  Unreachable,
  InvalidAperture,
  OutsideDomain,
  SingularSystem,
  NoDirichletBoundary,
  RadiusExceedsTruncation,
  NoAdmissiblePoint,
  Inconclusive,
  ParabolicEnd,
  UnsupportedEnd,
  UnstableStep,
  ProfileTooSmall,
  InsufficientRange,
  NotFound,
  ParseError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Exception type thrown by every hkends operation.  The kind identifies the
/// failure so callers can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hkends
