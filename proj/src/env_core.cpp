#include "codegym/env_core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "codegym/feedback.hpp"

namespace codegym::core {

std::string_view to_string(Variant variant) {
  return variant == Variant::Hard ? "hard" : "standard";
}

Variant parse_variant(std::string_view text) {
  if (text == "standard") return Variant::Standard;
  if (text == "hard") return Variant::Hard;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + std::string(text) + "'");
}

int initial_budget(Variant variant) {
  return variant == Variant::Hard ? kHardBudget : kStandardBudget;
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Easy: return "easy";
    case Tier::Medium: return "medium";
    case Tier::Hard: return "hard";
    case Tier::Scaled: return "scaled";
  }
  return "?";
}

TaskConfig::TaskConfig(Json entries) : entries_(std::move(entries)) {
  if (!entries_.is_object()) {
    throw Error(ErrorCode::ConfigSchemaViolation, "task config must be a JSON object");
  }
}

std::string_view to_string(ValueType type) {
  switch (type) {
    case ValueType::Int: return "int";
    case ValueType::Number: return "float";
    case ValueType::String: return "str";
    case ValueType::IntList: return "list[int]";
    case ValueType::List: return "list";
    case ValueType::Any: return "Any";
  }
  return "Any";
}

bool matches(ValueType type, const Json& value) {
  switch (type) {
    case ValueType::Int: return value.is_number_integer();
    case ValueType::Number: return value.is_number();
    case ValueType::String: return value.is_string();
    case ValueType::IntList:
      return value.is_array() &&
             std::all_of(value.begin(), value.end(),
                         [](const Json& v) { return v.is_number_integer(); });
    case ValueType::List: return value.is_array();
    case ValueType::Any: return true;
  }
  return false;
}

bool is_pascal_case(std::string_view name) {
  if (name.empty() || !std::isupper(static_cast<unsigned char>(name.front()))) return false;
  return std::all_of(name.begin(), name.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

void validate_descriptor(const ToolDescriptor& tool) {
  if (!is_pascal_case(tool.name)) {
    throw Error(ErrorCode::InvalidArgument, "tool name '" + tool.name + "' is not PascalCase");
  }
  std::set<std::string> seen;
  for (const auto& param : tool.params) {
    if (!seen.insert(param.name).second) {
      throw Error(ErrorCode::InvalidArgument,
                  "tool " + tool.name + " repeats parameter '" + param.name + "'");
    }
  }
}

Json to_json(const ActionCall& call) {
  return Json{{"name", call.name}, {"parameters", call.parameters}};
}

ActionCall action_from_json(const Json& value) {
  if (!value.is_object() || value.size() != 2 || !value.contains("name") ||
      !value.contains("parameters") || !value["name"].is_string() ||
      !value["parameters"].is_object()) {
    throw Error(ErrorCode::InvalidArgument,
                "action must be an object with exactly \"name\" and \"parameters\"");
  }
  return ActionCall{value["name"].get<std::string>(), value["parameters"]};
}

bool answers_equal(const Json& submitted, const Json& reference) {
  if (submitted.is_number() && reference.is_number()) {
    if (submitted.is_number_integer() && reference.is_number_integer()) {
      return submitted.get<std::int64_t>() == reference.get<std::int64_t>();
    }
    const double a = submitted.get<double>();
    const double b = reference.get<double>();
    if (a == b) return true;
    return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
  }
  if (submitted.is_array() && reference.is_array()) {
    if (submitted.size() != reference.size()) return false;
    for (std::size_t i = 0; i < submitted.size(); ++i) {
      if (!answers_equal(submitted[i], reference[i])) return false;
    }
    return true;
  }
  if (submitted.is_object() && reference.is_object()) {
    if (submitted.size() != reference.size()) return false;
    for (const auto& [key, value] : reference.items()) {
      auto it = submitted.find(key);
      if (it == submitted.end() || !answers_equal(*it, value)) return false;
    }
    return true;
  }
  if (submitted.type() != reference.type()) return false;
  return submitted == reference;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  });
}

}  // namespace

std::pair<std::string, TaskConfig> parse_env_string(std::string_view text) {
  const auto at = text.find('@');
  if (at == std::string_view::npos) {
    throw Error(ErrorCode::MalformedEnvString, "env string has no '@' separator");
  }
  const auto name = trim(text.substr(0, at));
  if (!is_identifier(name)) {
    throw Error(ErrorCode::MalformedEnvString,
                "env name '" + std::string(name) + "' is not an identifier");
  }
  Json payload;
  try {
    payload = parse_lenient(text.substr(at + 1));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedEnvString, std::string("invalid JSON payload: ") + e.what());
  }
  if (!payload.is_object()) {
    throw Error(ErrorCode::MalformedEnvString, "env string payload is not a JSON object");
  }
  return {std::string(name), TaskConfig(std::move(payload))};
}

std::string encode_env_string(std::string_view env_name, const TaskConfig& config) {
  std::string out(env_name);
  out += '@';
  try {
    canonical_dump(config.entries(), out);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::NonSerializableConfig, e.what());
  }
  return out;
}

void Environment::validate_config(const TaskConfig& config) const {
  const auto schema = config_schema();
  for (const auto& param : schema) {
    if (!config.contains(param.name)) {
      throw Error(ErrorCode::ConfigSchemaViolation,
                  std::string(name()) + " config is missing '" + param.name + "'");
    }
    if (!matches(param.type, config.at(param.name))) {
      throw Error(ErrorCode::ConfigSchemaViolation,
                  std::string(name()) + " config field '" + param.name + "' must be " +
                      std::string(to_string(param.type)));
    }
  }
  for (const auto& [key, value] : config.entries().items()) {
    const bool declared = std::any_of(schema.begin(), schema.end(),
                                      [&](const ParamSpec& p) { return p.name == key; });
    if (!declared) {
      throw Error(ErrorCode::ConfigSchemaViolation,
                  std::string(name()) + " config has unexpected field '" + key + "'");
    }
  }
  check_semantics(config);
}

TaskConfig Environment::generate_config(Tier, std::uint64_t) const {
  throw Error(ErrorCode::InvalidArgument,
              std::string(name()) + " does not provide a unit-test generator");
}

const ToolDescriptor* Environment::find_tool(std::string_view tool_name) const {
  for (const auto& tool : tools()) {
    if (tool.name == tool_name) return &tool;
  }
  return nullptr;
}

void Registry::add(std::shared_ptr<const Environment> env) {
  std::string key(env->name());
  envs_[key] = std::move(env);
}

const Environment* Registry::find(std::string_view name) const {
  auto it = envs_.find(name);
  return it == envs_.end() ? nullptr : it->second.get();
}

const Environment& Registry::at(std::string_view name) const {
  if (const auto* env = find(name)) return *env;
  throw Error(ErrorCode::UnknownEnvironment, "unknown environment '" + std::string(name) + "'");
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, env] : envs_) out.push_back(name);
  return out;
}

Registry Registry::subset(const std::vector<std::string>& names) const {
  Registry out;
  for (const auto& name : names) {
    auto it = envs_.find(name);
    if (it == envs_.end()) {
      throw Error(ErrorCode::UnknownEnvironment, "unknown environment '" + name + "'");
    }
    out.envs_[name] = it->second;
  }
  return out;
}

EnvInstance::EnvInstance(const Environment& env, TaskConfig config, Variant variant)
    : env_(&env), config_(std::move(config)), variant_(variant), budget_(initial_budget(variant)) {
  env.validate_config(config_);
  state_ = env.initial_state(config_);
}

EnvInstance::EnvInstance(const Environment& env, TaskConfig config, Variant variant, int budget)
    : env_(&env), config_(std::move(config)), variant_(variant), budget_(budget) {}

EnvInstance EnvInstance::restore(const Environment& env, TaskConfig config, Variant variant,
                                 const Json& state, int budget, int calls_used, int turns_used,
                                 bool finished, std::optional<int> final_reward) {
  EnvInstance out(env, std::move(config), variant, budget);
  out.load(state, budget, calls_used, turns_used, finished, final_reward);
  return out;
}

EnvInstance::EnvInstance(const EnvInstance& other)
    : env_(other.env_),
      config_(other.config_),
      variant_(other.variant_),
      state_(other.state_->clone()),
      budget_(other.budget_),
      calls_used_(other.calls_used_),
      turns_used_(other.turns_used_),
      finished_(other.finished_),
      final_reward_(other.final_reward_) {}

EnvInstance& EnvInstance::operator=(const EnvInstance& other) {
  if (this != &other) {
    EnvInstance copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void EnvInstance::require_live() const {
  if (finished_) throw Error(ErrorCode::EpisodeFinished, "episode already finished");
}

StepResult EnvInstance::finish(std::string observation, int reward) {
  finished_ = true;
  final_reward_ = reward;
  observation += " Episode finished. reward=" + std::to_string(reward);
  return StepResult{std::move(observation), reward, true, calls_used_};
}

StepResult EnvInstance::after_dispatch(std::string observation) {
  if (budget_ == 0) {
    return finish(std::move(observation) + " Tool budget of " +
                      std::to_string(initial_budget(variant_)) + " calls exhausted.",
                  0);
  }
  return StepResult{std::move(observation), std::nullopt, false, calls_used_};
}

StepResult EnvInstance::step(const ActionCall& call) {
  require_live();
  --budget_;
  ++calls_used_;

  const ToolDescriptor* tool = env_->find_tool(call.name);
  if (tool == nullptr) {
    return after_dispatch(protocol::format_error_feedback(
        protocol::DispatchError::UnknownTool, "unknown tool '" + call.name + "'"));
  }
  if (!call.parameters.is_object()) {
    return after_dispatch(protocol::format_error_feedback(protocol::DispatchError::BadParams,
                                                          "parameters must be an object"));
  }
  for (const auto& param : tool->params) {
    auto it = call.parameters.find(param.name);
    if (it == call.parameters.end()) {
      return after_dispatch(protocol::format_error_feedback(
          protocol::DispatchError::BadParams,
          tool->name + " requires parameter '" + param.name + "'"));
    }
    // Done accepts any JSON answer; a wrong type simply earns reward 0.
    if (call.name != "Done" && !matches(param.type, *it)) {
      return after_dispatch(protocol::format_error_feedback(
          protocol::DispatchError::BadParams, "parameter '" + param.name + "' of " + tool->name +
                                                  " must be " + std::string(to_string(param.type))));
    }
  }
  for (const auto& [key, value] : call.parameters.items()) {
    const bool declared = std::any_of(tool->params.begin(), tool->params.end(),
                                      [&](const ParamSpec& p) { return p.name == key; });
    if (!declared) {
      return after_dispatch(protocol::format_error_feedback(
          protocol::DispatchError::BadParams,
          tool->name + " has no parameter '" + key + "'"));
    }
  }

  if (call.name == "Done") {
    const Json& answer = call.parameters.at("answer");
    const bool correct = answers_equal(env_->canonical_answer(answer),
                                       env_->canonical_answer(reference_answer()));
    std::string text = "Your answer: " + canonical_dump(answer) +
                       (correct ? ". Result: correct." : ". Result: incorrect.");
    return finish(std::move(text), correct ? 1 : 0);
  }

  std::string observation;
  try {
    observation = env_->invoke(*state_, call);
  } catch (const ToolError& e) {
    observation = protocol::format_error_feedback(protocol::DispatchError::InvalidAction, e.what());
  }
  return after_dispatch(std::move(observation));
}

StepResult EnvInstance::observe() { return step(ActionCall{"Observe", Json::object()}); }

StepResult EnvInstance::done(const Json& answer) {
  return step(ActionCall{"Done", Json{{"answer", answer}}});
}

Json EnvInstance::reference_answer() const { return env_->reference_answer(config_); }

StepResult EnvInstance::record_parse_failure(const std::string& feedback) {
  require_live();
  ++turns_used_;
  if (turns_used_ >= turn_limit()) {
    return finish(feedback + " Turn limit of " + std::to_string(turn_limit()) +
                      " messages without a valid call reached.",
                  0);
  }
  return StepResult{feedback, std::nullopt, false, calls_used_};
}

StepResult EnvInstance::charge_failed_dispatch(const std::string& feedback) {
  require_live();
  --budget_;
  ++calls_used_;
  return after_dispatch(feedback);
}

const EnvState& EnvInstance::peek_state() const {
  ++private_reads_;
  return *state_;
}

void EnvInstance::load(const Json& state, int budget, int calls_used, int turns_used,
                       bool finished, std::optional<int> final_reward) {
  state_ = env_->restore_state(state);
  budget_ = budget;
  calls_used_ = calls_used;
  turns_used_ = turns_used;
  finished_ = finished;
  final_reward_ = final_reward;
}

StepResult RecordingApi::call(const ActionCall& call) {
  calls_.push_back(call);
  results_.push_back(instance_.step(call));
  return results_.back();
}

}  // namespace codegym::core
