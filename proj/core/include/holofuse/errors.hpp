#pragma once

#include <stdexcept>
#include <string>

namespace holofuse {

// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kConfig,
  kData,
  kLeakage,
  kNumeric,
  kShape,
  kDomain,
  kFormat,
  kState,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define HOLOFUSE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

HOLOFUSE_DEFINE_ERROR(ConfigError, kConfig)
HOLOFUSE_DEFINE_ERROR(DataError, kData)
HOLOFUSE_DEFINE_ERROR(LeakageError, kLeakage)
HOLOFUSE_DEFINE_ERROR(NumericError, kNumeric)
HOLOFUSE_DEFINE_ERROR(ShapeError, kShape)
HOLOFUSE_DEFINE_ERROR(DomainError, kDomain)
HOLOFUSE_DEFINE_ERROR(FormatError, kFormat)
HOLOFUSE_DEFINE_ERROR(StateError, kState)

#undef HOLOFUSE_DEFINE_ERROR

}  // namespace holofuse
