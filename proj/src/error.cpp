#include "pwainv/error.hpp"

#include <utility>

namespace pwainv {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Generic: return "Error";
    case ErrorCode::NoLocation: return "NoLocation";
    case ErrorCode::WrongDegree: return "WrongDegree";
    case ErrorCode::NotDecouplable: return "NotDecouplable";
    case ErrorCode::NonHyperbolic: return "NonHyperbolic";
    case ErrorCode::EmptySolutionSet: return "EmptySolutionSet";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::DegreeExceedsCap: return "DegreeExceedsCap";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::HorizonOverflow: return "HorizonOverflow";
    case ErrorCode::NoForceZeroValue: return "NoForceZeroValue";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::Io: return "Io";
  }
  return "Error";
}

static std::string compose(ErrorCode code, const std::string& message, const std::string& assumption,
                           std::optional<long> step) {
  std::string s = std::string(error_code_name(code)) + ": " + message;
  if (step) s += " (k=" + std::to_string(*step) + ")";
  if (!assumption.empty()) s += " [assumption " + assumption + "]";
  return s;
}

Error::Error(ErrorCode code, const std::string& message, std::string assumption, std::optional<long> step)
    : std::runtime_error(compose(code, message, assumption, step)),
      code_(code),
      message_(message),
      assumption_(std::move(assumption)),
      step_(step) {}

Error Error::at_step(long k) const {
  if (step_) return *this;
  Error e(code_, message_, assumption_, k);
  e.evidence_ = evidence_;
  return e;
}

}  // namespace pwainv
