#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codegym/error.hpp"
#include "codegym/json.hpp"

namespace codegym::core {

inline constexpr int kStandardBudget = 256;
inline constexpr int kHardBudget = 512;

enum class Variant { Standard, Hard };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);
int initial_budget(Variant variant);

// Named input parameters of one episode (one unit-test input).
class TaskConfig {
 public:
  TaskConfig() : entries_(Json::object()) {}
  explicit TaskConfig(Json entries);

  const Json& entries() const { return entries_; }
  const Json& at(const std::string& key) const { return entries_.at(key); }
  bool contains(const std::string& key) const { return entries_.contains(key); }

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;

 private:
  Json entries_;
};

// Semantic types used both for config schemas and tool parameters.
enum class ValueType { Int, Number, String, IntList, List, Any };

std::string_view to_string(ValueType type);
bool matches(ValueType type, const Json& value);

struct ParamSpec {
  std::string name;
  ValueType type = ValueType::Any;
  std::string doc;
};

struct ToolDescriptor {
  std::string name;
  std::vector<ParamSpec> params;
  std::string doc;
  std::string returns;
};

bool is_pascal_case(std::string_view name);
// Throws InvalidArgument when the name is not PascalCase or a parameter
// name repeats.
void validate_descriptor(const ToolDescriptor& tool);

struct ActionCall {
  std::string name;
  Json parameters = Json::object();

  friend bool operator==(const ActionCall&, const ActionCall&) = default;
};

// {"name": ..., "parameters": {...}}; exactly those two keys.
Json to_json(const ActionCall& call);
ActionCall action_from_json(const Json& value);

struct StepResult {
  std::string observation;
  std::optional<int> reward;  // present iff finished
  bool finished = false;
  int calls_used = 0;

  friend bool operator==(const StepResult&, const StepResult&) = default;
};

// Raised by tool handlers to reject a call. The episode continues and the
// message becomes an ERR_INVALID_ACTION observation.
class ToolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment-private episode state. Concrete environments store a plain
// struct behind this interface; serialization is what snapshots carry.
class EnvState {
 public:
  virtual ~EnvState() = default;
  virtual std::unique_ptr<EnvState> clone() const = 0;
  virtual Json to_json() const = 0;
};

template <class S>
class StateBox final : public EnvState {
 public:
  explicit StateBox(S value) : value(std::move(value)) {}
  std::unique_ptr<EnvState> clone() const override {
    return std::make_unique<StateBox>(value);
  }
  Json to_json() const override { return Json(value); }

  S value;
};

// What a solver sees: one call in, one observation out. Nothing else about
// the instance is reachable through it.
class ToolApi {
 public:
  virtual ~ToolApi() = default;
  virtual StepResult call(const ActionCall& call) = 0;

  StepResult call(std::string name, Json parameters = Json::object()) {
    return call(ActionCall{std::move(name), std::move(parameters)});
  }
};

enum class Tier { Easy, Medium, Hard, Scaled };

std::string_view to_string(Tier tier);


// Immutable definition of one environment: its POMDP pieces plus the
// reference answer, the oracle solver and the unit-test generator.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual std::span<const ToolDescriptor> tools() const = 0;
  virtual std::span<const ParamSpec> config_schema() const = 0;
  // Task text including at least one input -> output example.
  virtual std::string task_description() const = 0;
  // Config keys never shown to the agent.
  virtual std::vector<std::string> hidden_fields() const { return {}; }

  // Schema check (presence, no extras, types) followed by check_semantics.
  void validate_config(const TaskConfig& config) const;

  virtual std::unique_ptr<EnvState> initial_state(const TaskConfig& config) const = 0;
  virtual std::unique_ptr<EnvState> restore_state(const Json& state) const = 0;

  // Runs a non-Done tool. Parameters are already checked against the
  // descriptor. Throws ToolError on semantic rejection.
  virtual std::string invoke(EnvState& state, const ActionCall& call) const = 0;

  virtual Json reference_answer(const TaskConfig& config) const = 0;
  // Normalizes an answer before comparison (e.g. sorting a set-like list).
  virtual Json canonical_answer(Json answer) const { return answer; }

  // Oracle: solves the task through the tool API only.
  virtual void solve(ToolApi& api) const = 0;

  virtual TaskConfig generate_config(Tier tier, std::uint64_t seed) const;

  const ToolDescriptor* find_tool(std::string_view tool_name) const;
  bool has_tool(std::string_view tool_name) const { return find_tool(tool_name) != nullptr; }

 protected:
  virtual void check_semantics(const TaskConfig&) const {}
};

// Shared plumbing for environments whose state is a plain struct S with
// nlohmann to_json/from_json overloads.
template <class S>
class TypedEnvironment : public Environment {
 public:
  using Handler = std::string (*)(S&, const Json&);

  std::span<const ToolDescriptor> tools() const override { return tools_; }

  std::unique_ptr<EnvState> restore_state(const Json& state) const override {
    return std::make_unique<StateBox<S>>(state.get<S>());
  }

  std::string invoke(EnvState& state, const ActionCall& call) const override {
    for (std::size_t i = 0; i < tools_.size(); ++i) {
      if (tools_[i].name == call.name && handlers_[i] != nullptr) {
        return handlers_[i](static_cast<StateBox<S>&>(state).value, call.parameters);
      }
    }
    throw ToolError("no handler for " + call.name);
  }

 protected:
  void add_tool(ToolDescriptor tool, Handler handler) {
    tools_.push_back(std::move(tool));
    handlers_.push_back(handler);
  }

  // Done is evaluated by the episode driver, so it has no handler.
  void add_done_tool(ValueType answer_type, std::string answer_doc) {
    add_tool({"Done",
              {{"answer", answer_type, std::move(answer_doc)}},
              "Submit the final answer and end the episode.",
              "The verification result of the submitted answer."},
             nullptr);
  }

  static std::unique_ptr<EnvState> box(S value) {
    return std::make_unique<StateBox<S>>(std::move(value));
  }

 private:
  std::vector<ToolDescriptor> tools_;
  std::vector<Handler> handlers_;
};

// Integers compare exactly, other numbers within 1e-9 relative tolerance,
// containers element-wise. Anything else, including a type mismatch, is
// unequal.
bool answers_equal(const Json& submitted, const Json& reference);

// `Name@{json}`. Splits on the first '@'.
std::pair<std::string, TaskConfig> parse_env_string(std::string_view text);
std::string encode_env_string(std::string_view env_name, const TaskConfig& config);

class Registry {
 public:
  void add(std::shared_ptr<const Environment> env);
  const Environment* find(std::string_view name) const;
  // Throws UnknownEnvironment.
  const Environment& at(std::string_view name) const;
  std::vector<std::string> names() const;
  bool empty() const { return envs_.empty(); }

  // Keeps only the listed environments; throws UnknownEnvironment for a
  // name that is not registered.
  Registry subset(const std::vector<std::string>& names) const;

 private:
  std::map<std::string, std::shared_ptr<const Environment>, std::less<>> envs_;
};

// One live episode. Not safe for concurrent mutation.
class EnvInstance {
 public:
  EnvInstance(const Environment& env, TaskConfig config, Variant variant);

  // Rebuilds an instance from serialized parts without re-validating the
  // config or re-initializing state.
  static EnvInstance restore(const Environment& env, TaskConfig config, Variant variant,
                             const Json& state, int budget, int calls_used, int turns_used,
                             bool finished, std::optional<int> final_reward);

  EnvInstance(const EnvInstance& other);
  EnvInstance& operator=(const EnvInstance& other);
  EnvInstance(EnvInstance&&) noexcept = default;
  EnvInstance& operator=(EnvInstance&&) noexcept = default;

  // Throws EpisodeFinished once the episode is over.
  StepResult step(const ActionCall& call);
  StepResult observe();
  StepResult done(const Json& answer);

  // Pure function of the config; consumes no budget.
  Json reference_answer() const;

  // An agent message without a usable call. Consumes one turn of the
  // 2x-budget turn allowance but no tool budget.
  StepResult record_parse_failure(const std::string& feedback);
  // A dispatch whose execution was rolled back: state unchanged, budget
  // still charged.
  StepResult charge_failed_dispatch(const std::string& feedback);

  const Environment& environment() const { return *env_; }
  const TaskConfig& config() const { return config_; }
  Variant variant() const { return variant_; }
  int budget() const { return budget_; }
  int calls_used() const { return calls_used_; }
  int turns_used() const { return turns_used_; }
  int turn_limit() const { return 2 * initial_budget(variant_); }
  bool finished() const { return finished_; }
  std::optional<int> final_reward() const { return final_reward_; }

  // Direct state access for tests and tooling. Every call is counted so
  // oracle runs can prove they never looked.
  const EnvState& peek_state() const;
  std::uint64_t private_reads() const { return private_reads_; }

  // Serialized form used by snapshots.
  Json state_json() const { return state_->to_json(); }
  void load(const Json& state, int budget, int calls_used, int turns_used, bool finished,
            std::optional<int> final_reward);

 private:
  EnvInstance(const Environment& env, TaskConfig config, Variant variant, int budget);

  void require_live() const;
  StepResult finish(std::string observation, int reward);
  StepResult after_dispatch(std::string observation);

  const Environment* env_;
  TaskConfig config_;
  Variant variant_;
  std::unique_ptr<EnvState> state_;
  int budget_;
  int calls_used_ = 0;
  int turns_used_ = 0;
  bool finished_ = false;
  std::optional<int> final_reward_;
  mutable std::uint64_t private_reads_ = 0;
};

// ToolApi bound to an instance that logs every call and result.
class RecordingApi final : public ToolApi {
 public:
  explicit RecordingApi(EnvInstance& instance) : instance_(instance) {}
  using ToolApi::call;
  StepResult call(const ActionCall& call) override;

  const std::vector<ActionCall>& calls() const { return calls_; }
  const std::vector<StepResult>& results() const { return results_; }

 private:
  EnvInstance& instance_;
  std::vector<ActionCall> calls_;
  std::vector<StepResult> results_;
};

}  // namespace codegym::core
