#pragma once

#include <stdexcept>
#include <string>

namespace gradflux {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GRADFLUX_ERROR(Name)                 \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

GRADFLUX_ERROR(DomainError);
GRADFLUX_ERROR(GridError);
GRADFLUX_ERROR(SizeError);
GRADFLUX_ERROR(ModeError);
GRADFLUX_ERROR(ParseError);
GRADFLUX_ERROR(QuadratureError);
GRADFLUX_ERROR(ConvergenceError);
GRADFLUX_ERROR(SolveError);
GRADFLUX_ERROR(EnvelopeError);
GRADFLUX_ERROR(InsufficientSamples);
GRADFLUX_ERROR(PremiseNotMet);
GRADFLUX_ERROR(HypothesisFailed);
GRADFLUX_ERROR(ProfileError);
GRADFLUX_ERROR(ConfigError);

#undef GRADFLUX_ERROR

}  // namespace gradflux
