#include "support/fixtures.hpp"

#include <cstdlib>
#include <cstring>
#include <vector>

#include "codegym/env_library.hpp"

namespace codegym::testing {

namespace {

struct CounterState {
  std::int64_t counter = 0;
  std::int64_t target = 0;
  std::vector<std::int64_t> log;
};

void to_json(Json& j, const CounterState& s) {
  j = Json{{"counter", s.counter}, {"target", s.target}, {"log", s.log}};
}
void from_json(const Json& j, CounterState& s) {
  j.at("counter").get_to(s.counter);
  j.at("target").get_to(s.target);
  j.at("log").get_to(s.log);
}

std::string observe(CounterState& s, const Json&) {
  return "counter: " + std::to_string(s.counter) + ", log length: " + std::to_string(s.log.size()) +
         ", target: " + std::to_string(s.target);
}

std::string add(CounterState& s, const Json& p) {
  const auto x = p.at("x").get<std::int64_t>();
  s.counter += x;
  s.log.push_back(x);
  return "counter: " + std::to_string(s.counter);
}

std::string spin(CounterState& s, const Json&) {
  s.counter += 1000;  // must never become visible
  volatile std::uint64_t n = 0;
  for (;;) n = n + 1;
}

std::string crash(CounterState& s, const Json&) {
  s.counter += 1000;
  std::abort();
}

std::string hog(CounterState& s, const Json&) {
  s.counter += 1000;
  std::vector<std::unique_ptr<char[]>> blocks;
  for (;;) {
    auto block = std::make_unique<char[]>(std::size_t{16} << 20);
    std::memset(block.get(), 1, std::size_t{16} << 20);
    blocks.push_back(std::move(block));
  }
}

std::string throw_tool(CounterState& s, const Json&) {
  s.counter += 1000;
  throw std::runtime_error("fixture failure");
}

std::int64_t trailing(const std::string& text) {
  const auto pos = text.find_last_of(' ');
  return std::stoll(text.substr(pos + 1));
}

class CounterEnv : public core::TypedEnvironment<CounterState> {
 public:
  CounterEnv(std::string name, OracleMode mode, bool with_done) : name_(std::move(name)), mode_(mode) {
    add_tool({"Observe", {}, "Show the counter.", "The counter and log length."}, observe);
    add_tool({"Add", {{"x", core::ValueType::Int, "Amount to add."}}, "Add to the counter.",
              "The new counter."},
             add);
    add_tool({"Spin", {}, "Never returns.", "Nothing."}, spin);
    add_tool({"Crash", {}, "Aborts.", "Nothing."}, crash);
    add_tool({"Hog", {}, "Allocates without bound.", "Nothing."}, hog);
    add_tool({"Throw", {}, "Raises an unexpected exception.", "Nothing."}, throw_tool);
    if (with_done) add_done_tool(core::ValueType::Int, "The target.");
  }

  std::string_view name() const override { return name_; }
  std::span<const core::ParamSpec> config_schema() const override { return schema_; }
  std::string task_description() const override {
    return "Make the counter equal the target, then submit it. Example: target 3 -> answer 3.";
  }
  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig& config) const override {
    return box({0, config.at("target").get<std::int64_t>(), {}});
  }
  Json reference_answer(const core::TaskConfig& config) const override { return config.at("target"); }

  void solve(core::ToolApi& api) const override {
    const auto info = api.call("Observe");
    if (mode_ == OracleMode::NeverDone) return;
    const auto target = trailing(info.observation);
    if (mode_ == OracleMode::SpinOn13 && target == 13) api.call("Spin");
    const auto result = api.call("Add", Json{{"x", target}});
    api.call("Done", Json{{"answer", trailing(result.observation)}});
  }

 private:
  std::string name_;
  OracleMode mode_;
  std::vector<core::ParamSpec> schema_{{"target", core::ValueType::Int, "value to reach"}};
};

struct MarkupState {
  std::vector<std::string> received;
};
void to_json(Json& j, const MarkupState& s) { j = Json{{"received", s.received}}; }
void from_json(const Json& j, MarkupState& s) { j.at("received").get_to(s.received); }

std::string function_name(MarkupState& s, const Json& p) {
  const auto k1 = p.at("key1").get<std::string>();
  const auto k2 = p.at("key2").get<std::string>();
  s.received.push_back(k1 + "," + k2);
  return "function_name received key1=" + k1 + " key2=" + k2;
}

std::string markup_observe(MarkupState& s, const Json&) {
  return "calls received: " + std::to_string(s.received.size());
}

class MarkupEnv final : public core::TypedEnvironment<MarkupState> {
 public:
  MarkupEnv() {
    add_tool({"function_name",
              {{"key1", core::ValueType::String, "First value."},
               {"key2", core::ValueType::String, "Second value."}},
              "Echo two values.", "The received values."},
             function_name);
    add_tool({"Observe", {}, "Count received calls.", "The count."}, markup_observe);
    add_done_tool(core::ValueType::Int, "Number of function_name calls.");
  }
  std::string_view name() const override { return "MarkupFixtureEnv"; }
  std::span<const core::ParamSpec> config_schema() const override { return {}; }
  std::string task_description() const override {
    return "Call function_name once, then submit 1. Example: one call -> answer 1.";
  }
  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig&) const override {
    return box({});
  }
  Json reference_answer(const core::TaskConfig&) const override { return 1; }
  void solve(core::ToolApi& api) const override {
    api.call("function_name", Json{{"key1", "value1"}, {"key2", "value2"}});
    api.call("Done", Json{{"answer", 1}});
  }
};

}  // namespace

std::shared_ptr<const core::Environment> make_fault_env(OracleMode mode) {
  const char* name = mode == OracleMode::Normal     ? "FaultFixtureEnv"
                     : mode == OracleMode::SpinOn13 ? "SpinFixtureEnv"
                                                    : "SilentFixtureEnv";
  return std::make_shared<CounterEnv>(name, mode, true);
}

std::shared_ptr<const core::Environment> make_no_done_env() {
  return std::make_shared<CounterEnv>("NoDoneFixtureEnv", OracleMode::Normal, false);
}

std::shared_ptr<const core::Environment> make_markup_env() { return std::make_shared<MarkupEnv>(); }

const core::Registry& fixture_registry() {
  static const core::Registry registry = [] {
    core::Registry r = envs::builtin_registry();
    r.add(make_fault_env(OracleMode::Normal));
    r.add(make_fault_env(OracleMode::SpinOn13));
    r.add(make_fault_env(OracleMode::NeverDone));
    r.add(make_no_done_env());
    r.add(make_markup_env());
    return r;
  }();
  return registry;
}

}  // namespace codegym::testing
