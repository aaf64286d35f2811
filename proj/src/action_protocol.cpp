#include "codegym/action_protocol.hpp"

#include <algorithm>

namespace codegym::protocol {

std::string_view error_code(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::NoMarkup: return "ERR_NO_MARKUP";
    case ParseFailure::UnterminatedMarkup: return "ERR_UNTERMINATED_MARKUP";
    case ParseFailure::InvalidJson: return "ERR_INVALID_JSON";
    case ParseFailure::NotAList: return "ERR_NOT_A_LIST";
    case ParseFailure::MultipleCalls: return "ERR_MULTIPLE_CALLS";
    case ParseFailure::MissingKeys: return "ERR_MISSING_KEYS";
  }
  return "ERR_UNKNOWN";
}

std::string_view error_code(DispatchError error) {
  switch (error) {
    case DispatchError::UnknownTool: return "ERR_UNKNOWN_TOOL";
    case DispatchError::BadParams: return "ERR_BAD_PARAMS";
    case DispatchError::InvalidAction: return "ERR_INVALID_ACTION";
    case DispatchError::Timeout: return "ERR_TIMEOUT";
    case DispatchError::MemoryExceeded: return "ERR_MEMORY";
    case DispatchError::Fault: return "ERR_FAULT";
  }
  return "ERR_UNKNOWN";
}

std::string_view to_string(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::NoMarkup: return "NoMarkup";
    case ParseFailure::UnterminatedMarkup: return "UnterminatedMarkup";
    case ParseFailure::InvalidJson: return "InvalidJson";
    case ParseFailure::NotAList: return "NotAList";
    case ParseFailure::MultipleCalls: return "MultipleCalls";
    case ParseFailure::MissingKeys: return "MissingKeys";
  }
  return "Unknown";
}

namespace {

std::string_view guidance(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::NoMarkup:
      return "no function call found. Wrap exactly one call in the function-call markers.";
    case ParseFailure::UnterminatedMarkup:
      return "the function-call begin marker has no matching end marker.";
    case ParseFailure::InvalidJson:
      return "the text between the markers is not valid JSON.";
    case ParseFailure::NotAList:
      return "the call payload must be a JSON list holding one object.";
    case ParseFailure::MultipleCalls:
      return "call at most one function per step; the list must hold exactly one object.";
    case ParseFailure::MissingKeys:
      return "the call object needs exactly the keys \"name\" (string) and \"parameters\" "
             "(object).";
  }
  return "";
}

std::string_view guidance(DispatchError error) {
  switch (error) {
    case DispatchError::UnknownTool: return "the requested tool does not exist.";
    case DispatchError::BadParams: return "the call parameters do not match the tool signature.";
    case DispatchError::InvalidAction: return "the tool rejected the call.";
    case DispatchError::Timeout: return "the call exceeded its time limit and was rolled back.";
    case DispatchError::MemoryExceeded:
      return "the call exceeded its memory limit and was rolled back.";
    case DispatchError::Fault: return "the call failed inside the environment and was rolled back.";
  }
  return "";
}

std::string one_line(std::string_view text) {
  std::string out(text);
  std::replace_if(out.begin(), out.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
  return out;
}

}  // namespace

std::string format_error_feedback(ParseFailure failure) {
  std::string out(error_code(failure));
  out += ": ";
  out += guidance(failure);
  return out;
}

std::string format_error_feedback(DispatchError error, std::string_view detail) {
  std::string out(error_code(error));
  out += ": ";
  out += guidance(error);
  if (!detail.empty()) {
    out += ' ';
    out += one_line(detail);
  }
  return out;
}

const Markers& default_markers() {
  static const Markers markers;
  return markers;
}

ParsedMessage extract_function_call(std::string_view text, const Markers& markers) {
  ParsedMessage out;
  const auto begin = text.find(markers.begin);
  if (begin == std::string_view::npos) {
    out.preamble = std::string(text);
    out.failure = ParseFailure::NoMarkup;
    return out;
  }
  out.preamble = std::string(text.substr(0, begin));
  const auto payload_start = begin + markers.begin.size();
  const auto end = text.find(markers.end, payload_start);
  if (end == std::string_view::npos) {
    out.failure = ParseFailure::UnterminatedMarkup;
    return out;
  }
  const auto payload = text.substr(payload_start, end - payload_start);

  const Json parsed = Json::parse(payload.begin(), payload.end(), nullptr, false);
  if (parsed.is_discarded()) {
    out.failure = ParseFailure::InvalidJson;
    return out;
  }
  if (!parsed.is_array()) {
    out.failure = ParseFailure::NotAList;
    return out;
  }
  if (parsed.size() > 1) {
    out.failure = ParseFailure::MultipleCalls;
    return out;
  }
  if (parsed.empty()) {
    out.failure = ParseFailure::MissingKeys;
    return out;
  }
  const Json& item = parsed.front();
  if (!item.is_object() || item.size() != 2 || !item.contains("name") ||
      !item.contains("parameters") || !item["name"].is_string() ||
      !item["parameters"].is_object()) {
    out.failure = ParseFailure::MissingKeys;
    return out;
  }
  out.call = core::ActionCall{item["name"].get<std::string>(), item["parameters"]};
  return out;
}

std::string wrap_call(const core::ActionCall& call, const Markers& markers) {
  std::string payload;
  canonical_dump(core::to_json(call), payload);
  std::string out = markers.begin;
  out += '[';
  // '<' only occurs inside string literals here; escaping it keeps marker
  // text in parameter values from closing the call early.
  for (char c : payload) {
    if (c == '<') {
      out += "\\u003c";
    } else {
      out += c;
    }
  }
  out += ']';
  out += markers.end;
  return out;
}

namespace {

void render_tool(const core::ToolDescriptor& tool, std::string& out) {
  out += "Function:\ndef ";
  out += tool.name;
  out += '(';
  for (std::size_t i = 0; i < tool.params.size(); ++i) {
    if (i > 0) out += ", ";
    out += tool.params[i].name;
    out += ": ";
    out += core::to_string(tool.params[i].type);
  }
  out += "):\n    r\"\"\"\n    ";
  out += tool.doc;
  out += "\n    Args:\n";
  if (tool.params.empty()) out += "        None\n";
  for (const auto& param : tool.params) {
    out += "        ";
    out += param.name;
    out += " (";
    out += core::to_string(param.type);
    out += "): ";
    out += param.doc;
    out += '\n';
  }
  out += "    Returns:\n        str: ";
  out += tool.returns;
  out += "\n    \"\"\"\n";
}

}  // namespace

std::string render_tool_docs(const core::Environment& env) {
  std::string out;
  bool first = true;
  for (const auto& tool : env.tools()) {
    if (!first) out += '\n';
    first = false;
    render_tool(tool, out);
  }
  return out;
}

std::string render_tool_docs(const core::Registry& registry, std::string_view env_name) {
  return render_tool_docs(registry.at(env_name));
}

PromptBundle render_agent_prompt(const core::Environment& env, const core::TaskConfig& config,
                                 const Markers& markers) {
  env.validate_config(config);
  PromptBundle bundle;
  bundle.system = render_tool_docs(env);

  std::string& user = bundle.user;
  user += "Solve the task below by calling the functions listed in the system message.\n\n";
  user += "Rules:\n";
  user += "1. Only call the provided functions. Do not write code, and call one function per "
          "step.\n";
  user += "2. Wait for each function's result before deciding the next call; never guess a "
          "result.\n";
  user += "3. If a function's behavior is unclear, call it and adjust to what it returns.\n";
  user += "4. Put each call between " + markers.begin + " and " + markers.end +
          " as a JSON list holding a single object with the keys \"name\" (the function name) "
          "and \"parameters\" (an object of argument values). For example:\n";
  user += wrap_call(core::ActionCall{"GetValue", Json{{"key", "alpha"}}}, markers);
  user += "\n5. Submit the final answer with Done. You have a limited number of function "
          "calls.\n\n";
  user += "Task:\n";
  user += env.task_description();
  return bundle;
}

PromptBundle render_agent_prompt(const core::Registry& registry, std::string_view env_name,
                                 const core::TaskConfig& config) {
  return render_agent_prompt(registry.at(env_name), config);
}

}  // namespace codegym::protocol
