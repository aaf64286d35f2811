#pragma once

#include <string>
#include <string_view>

namespace codegym::protocol {

enum class ParseFailure {
  NoMarkup,
  UnterminatedMarkup,
  InvalidJson,
  NotAList,
  MultipleCalls,
  MissingKeys,
};

enum class DispatchError {
  UnknownTool,
  BadParams,
  InvalidAction,
  Timeout,
  MemoryExceeded,
  Fault,
};

// Wire-stable prefixes: ERR_NO_MARKUP, ERR_UNKNOWN_TOOL, ...
std::string_view error_code(ParseFailure failure);
std::string_view error_code(DispatchError error);
std::string_view to_string(ParseFailure failure);

// One line: "<CODE>: <guidance>". `detail` is appended after the guidance
// with newlines flattened; callers must not put hidden state in it.
std::string format_error_feedback(ParseFailure failure);
std::string format_error_feedback(DispatchError error, std::string_view detail = {});

}  // namespace codegym::protocol
