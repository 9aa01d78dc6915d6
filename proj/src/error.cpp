#include "hkends/error.hpp"

namespace hkends {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OverlappingEnds: return "OverlappingEnds";
    case ErrorKind::EmptyEnds: return "EmptyEnds";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::InvalidAperture: return "InvalidAperture";
    case ErrorKind::OutsideDomain: return "OutsideDomain";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoDirichletBoundary: return "NoDirichletBoundary";
    case ErrorKind::RadiusExceedsTruncation: return "RadiusExceedsTruncation";
    case ErrorKind::NoAdmissiblePoint: return "NoAdmissiblePoint";
    case ErrorKind::Inconclusive: return "Inconclusive";
    case ErrorKind::ParabolicEnd: return "ParabolicEnd";
    case ErrorKind::UnsupportedEnd: return "UnsupportedEnd";
    case ErrorKind::UnstableStep: return "UnstableStep";
    case ErrorKind::ProfileTooSmall: return "ProfileTooSmall";
    case ErrorKind::InsufficientRange: return "InsufficientRange";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace hkends
