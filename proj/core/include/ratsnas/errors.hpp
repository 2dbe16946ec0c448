#pragma once

#include <stdexcept>
#include <string>

namespace ratsnas {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RATSNAS_ERROR_TYPE(NAME) \
  class NAME : public Error {    \
   public:                       \
    using Error::Error;          \
  };

// cell model
RATSNAS_ERROR_TYPE(CycleError)
RATSNAS_ERROR_TYPE(ShapeError)
RATSNAS_ERROR_TYPE(TerminalError)
RATSNAS_ERROR_TYPE(OneHotError)
RATSNAS_ERROR_TYPE(UnknownOpError)

// tensor math
RATSNAS_ERROR_TYPE(ShapeMismatchError)
RATSNAS_ERROR_TYPE(NonFiniteError)
RATSNAS_ERROR_TYPE(NotScalarError)

// predictors
RATSNAS_ERROR_TYPE(EmptyPoolError)

// metrics
RATSNAS_ERROR_TYPE(LengthMismatchError)
RATSNAS_ERROR_TYPE(TooShortError)
RATSNAS_ERROR_TYPE(KTooLargeError)
RATSNAS_ERROR_TYPE(DuplicateIdError)

// benchmark files and the synthetic generator
RATSNAS_ERROR_TYPE(ParseError)
RATSNAS_ERROR_TYPE(ValidationError)
RATSNAS_ERROR_TYPE(SpecError)

// search
RATSNAS_ERROR_TYPE(ExhaustedIntervalError)
RATSNAS_ERROR_TYPE(UnknownCellError)

#undef RATSNAS_ERROR_TYPE

}  // namespace ratsnas
