#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace oedkit {

enum class ErrorCode {
  NotPositiveDefinite,
  DimensionMismatch,
  InvalidArgument,
  InvalidGrid,
  TimeOffLattice,
  MissingComponent,
  NotLinear,
  NonConvergence,
  NonBinaryDesign,
  NotDifferentiable,
  NonDifferentiablePenalty,
  InvalidBounds,
  TooManyDesigns,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by iterative solvers that hit their iteration cap. Carries the best
/// iterate found so far so callers can still persist it.
template <typename Result>
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Result best)
      : Error(ErrorCode::NonConvergence, what), best_(std::move(best)) {}

  const Result& best() const noexcept { return best_; }

 private:
  Result best_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace oedkit
