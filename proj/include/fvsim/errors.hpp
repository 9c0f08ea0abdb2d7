#pragma once

#include <stdexcept>
#include <string>

namespace fvsim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FVSIM_DEFINE_ERROR(Name)                \
  class Name : public Error {                   \
   public:                                      \
    using Error::Error;                         \
  };

FVSIM_DEFINE_ERROR(CoefficientError)
FVSIM_DEFINE_ERROR(RateError)
FVSIM_DEFINE_ERROR(UnsupportedBridge)
FVSIM_DEFINE_ERROR(InvalidModel)
FVSIM_DEFINE_ERROR(StructuralError)
FVSIM_DEFINE_ERROR(KernelContractViolation)
FVSIM_DEFINE_ERROR(DegenerateConditioning)
FVSIM_DEFINE_ERROR(EigenError)
FVSIM_DEFINE_ERROR(NotApplicable)
FVSIM_DEFINE_ERROR(ConfigError)
FVSIM_DEFINE_ERROR(SweepUnsupported)

#undef FVSIM_DEFINE_ERROR

}  // namespace fvsim
