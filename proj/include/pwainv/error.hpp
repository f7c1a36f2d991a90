#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace pwainv {

// Values double as CLI exit codes.
enum class ErrorCode : int {
  Generic = 1,
  NoLocation = 10,
  WrongDegree = 11,
  NotDecouplable = 12,
  NonHyperbolic = 13,
  EmptySolutionSet = 14,
  AssumptionViolated = 15,
  DegreeExceedsCap = 16,
  DimensionMismatch = 17,
  HorizonOverflow = 18,
  NoForceZeroValue = 19,
  InvalidModel = 20,
  Io = 21,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string assumption = {},
        std::optional<long> step = std::nullopt);

  ErrorCode code() const { return code_; }
  // Modelling assumption implicated by the failure ("A5", "A9a", ...), empty if none.
  const std::string& assumption() const { return assumption_; }
  std::optional<long> step() const { return step_; }
  const std::string& message() const { return message_; }
  // Copy of this error tagged with a time step (keeps an existing step).
  Error at_step(long k) const;
  // Numeric evidence attached by the thrower (residuals, margins).
  const std::map<std::string, double>& evidence() const { return evidence_; }
  Error& with(const std::string& key, double value) {
    evidence_[key] = value;
    return *this;
  }

 private:
  ErrorCode code_;
  std::string message_;
  std::string assumption_;
  std::optional<long> step_;
  std::map<std::string, double> evidence_;
};

}  // namespace pwainv
