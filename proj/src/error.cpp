#include "qmmm/error.hpp"

namespace qmmm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonIntegrable: return "NonIntegrable";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::AtomLimit: return "AtomLimit";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NotSerializable: return "NotSerializable";
  }
  return "Unknown";
}

}  // namespace qmmm
