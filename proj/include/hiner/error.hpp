#pragma once

#include <stdexcept>
#include <string>

namespace hiner {

// Coarse failure class; the CLI maps each to an exit status.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  virtual const char* kind() const noexcept { return "error"; }

 private:
  ErrorCategory category_;
};

#define HINER_DEFINE_ERROR(Name, Category, Kind)                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what)                         \
        : Error(ErrorCategory::Category, what) {}                  \
    const char* kind() const noexcept override { return Kind; }    \
  };

HINER_DEFINE_ERROR(ConfigError, config, "config")
HINER_DEFINE_ERROR(SizingError, config, "sizing")
HINER_DEFINE_ERROR(DomainError, config, "domain")
HINER_DEFINE_ERROR(ShapeMismatch, data, "shape_mismatch")
HINER_DEFINE_ERROR(IoError, data, "io")
HINER_DEFINE_ERROR(MalformedHeader, data, "malformed_header")
HINER_DEFINE_ERROR(TruncatedPayload, data, "truncated_payload")
HINER_DEFINE_ERROR(DimensionMismatch, data, "dimension_mismatch")
HINER_DEFINE_ERROR(DegenerateInput, data, "degenerate_input")
HINER_DEFINE_ERROR(BadMagic, data, "bad_magic")
HINER_DEFINE_ERROR(VersionMismatch, data, "version_mismatch")
HINER_DEFINE_ERROR(TruncatedStream, data, "truncated_stream")
HINER_DEFINE_ERROR(CorruptStream, data, "corrupt_stream")
HINER_DEFINE_ERROR(NonFiniteInput, numerical, "non_finite_input")

#undef HINER_DEFINE_ERROR

}  // namespace hiner
