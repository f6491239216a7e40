#include "imlab/error.hpp"

namespace imlab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularMetric: return "SingularMetric";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::AsymmetricShape: return "AsymmetricShape";
    case ErrorCode::IncompatibleForms: return "IncompatibleForms";
    case ErrorCode::NonSPDAnchor: return "NonSPDAnchor";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::UnsupportedExponent: return "UnsupportedExponent";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::BadGrid: return "BadGrid";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

static std::string decorate(ErrorCode code, const std::string& what,
                            std::optional<std::size_t> node) {
  std::string msg = std::string(to_string(code)) + ": " + what;
  if (node) msg += " (node " + std::to_string(*node) + ")";
  return msg;
}

Error::Error(ErrorCode code, const std::string& what, std::optional<std::size_t> node)
    : std::runtime_error(decorate(code, what, node)), code_(code), node_(node) {}

}  // namespace imlab
