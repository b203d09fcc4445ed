#pragma once

#include <stdexcept>
#include <string>

namespace keydetect {

// Every failure raised by the library derives from Error so that callers
// (CLI, HTTP layer) can map it to an exit code or an error_code string.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* code() const noexcept { return "error"; }
};

#define KEYDETECT_DEFINE_ERROR(Name, Code)                   \
  class Name : public Error {                                \
   public:                                                   \
    using Error::Error;                                      \
    const char* code() const noexcept override { return Code; } \
  };

KEYDETECT_DEFINE_ERROR(MalformedTrace, "malformed_trace")
KEYDETECT_DEFINE_ERROR(InsufficientData, "insufficient_data")
KEYDETECT_DEFINE_ERROR(SchemaError, "schema_error")
KEYDETECT_DEFINE_ERROR(ValueError, "value_error")
KEYDETECT_DEFINE_ERROR(DimensionMismatch, "dimension_mismatch")
KEYDETECT_DEFINE_ERROR(DegenerateNorm, "degenerate_norm")
KEYDETECT_DEFINE_ERROR(NonConvergence, "non_convergence")
KEYDETECT_DEFINE_ERROR(ShapeMismatch, "shape_mismatch")
KEYDETECT_DEFINE_ERROR(Divergence, "divergence")
KEYDETECT_DEFINE_ERROR(SubjectTooSmall, "subject_too_small")
KEYDETECT_DEFINE_ERROR(EmptySet, "empty_set")
KEYDETECT_DEFINE_ERROR(FormatError, "format_error")
KEYDETECT_DEFINE_ERROR(UnknownUser, "unknown_user")
KEYDETECT_DEFINE_ERROR(NotTrained, "not_trained")
KEYDETECT_DEFINE_ERROR(InsufficientEnrollment, "insufficient_enrollment")
KEYDETECT_DEFINE_ERROR(BadRequest, "bad_request")

#undef KEYDETECT_DEFINE_ERROR

}  // namespace keydetect
