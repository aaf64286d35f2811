#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codegym {

enum class ErrorCode {
  MalformedEnvString,
  UnknownEnvironment,
  ConfigSchemaViolation,
  EpisodeFinished,
  NonSerializableConfig,
  EmptyInput,
  ValueOutOfRange,
  OracleFailed,
  SerializationFailure,
  ManifestParseError,
  IoFailure,
  ConnectionFailure,
  ServerError,
  BindFailure,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the server in particular) can map it onto a wire error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace codegym
