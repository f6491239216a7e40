#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace imlab {

enum class ErrorCode {
  SingularMetric,
  NotSPD,
  RankDeficient,
  BadExponent,
  GridMismatch,
  AsymmetricShape,
  IncompatibleForms,
  NonSPDAnchor,
  DegenerateCovariance,
  UnsupportedExponent,
  BadConfig,
  BadGrid,
  OutOfDomain,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Carries a machine-readable code and, for per-node
/// failures, the flat index of the offending node.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> node = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> node() const noexcept { return node_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> node_;
};

}  // namespace imlab
