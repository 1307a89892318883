#pragma once

#include <stdexcept>
#include <string>

namespace deepprae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DEEPPRAE_ERROR(Name)             \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

DEEPPRAE_ERROR(DomainError)
DEEPPRAE_ERROR(ConvergenceError)
DEEPPRAE_ERROR(DimensionMismatch)
DEEPPRAE_ERROR(InvalidArgument)
DEEPPRAE_ERROR(EmptyLabelClass)
DEEPPRAE_ERROR(SingleClassData)
DEEPPRAE_ERROR(NonFiniteLoss)
DEEPPRAE_ERROR(FormatVersionMismatch)
DEEPPRAE_ERROR(TruncatedStream)
DEEPPRAE_ERROR(UnboundedNeuron)
DEEPPRAE_ERROR(CalibrationImpossible)
DEEPPRAE_ERROR(NonFiniteState)
DEEPPRAE_ERROR(ConfigParse)
DEEPPRAE_ERROR(IoError)
DEEPPRAE_ERROR(MissingColumns)

#undef DEEPPRAE_ERROR

}  // namespace deepprae
