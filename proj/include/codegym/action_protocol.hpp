#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "codegym/env_core.hpp"
#include "codegym/feedback.hpp"

namespace codegym::protocol {

struct Markers {
  std::string begin = "<|FunctionCallBegin|>";
  std::string end = "<|FunctionCallEnd|>";
};

const Markers& default_markers();

struct ParsedMessage {
  std::string preamble;
  std::optional<core::ActionCall> call;
  std::optional<ParseFailure> failure;

  bool ok() const { return call.has_value(); }
};

// Honors only the first begin/end pair. Text after the end marker is
// ignored. Never throws on any input.
ParsedMessage extract_function_call(std::string_view text,
                                    const Markers& markers = default_markers());

// `[{"name": ..., "parameters": {...}}]` wrapped in the markers. Every '<'
// in the payload is written as \u003c so values cannot contain an end
// marker that starts with '<'.
std::string wrap_call(const core::ActionCall& call, const Markers& markers = default_markers());

// One block per tool in declaration order. Value-free and deterministic.
std::string render_tool_docs(const core::Environment& env);
std::string render_tool_docs(const core::Registry& registry, std::string_view env_name);

struct PromptBundle {
  std::string system;
  std::string user;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Throws ConfigSchemaViolation if the config does not fit the environment.
PromptBundle render_agent_prompt(const core::Environment& env, const core::TaskConfig& config,
                                 const Markers& markers = default_markers());
PromptBundle render_agent_prompt(const core::Registry& registry, std::string_view env_name,
                                 const core::TaskConfig& config);

}  // namespace codegym::protocol
