// Runs every end-to-end acceptance check and prints one PASS/FAIL line per
// check. Exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "codegym/action_protocol.hpp"
#include "codegym/curator.hpp"
#include "codegym/env_library.hpp"
#include "codegym/executor.hpp"
#include "codegym/gym_server.hpp"
#include "codegym/rng.hpp"
#include "codegym/rollout.hpp"
#include "codegym/verifier.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace codegym;
using namespace std::chrono_literals;
using core::ActionCall;
using core::TaskConfig;
using core::Variant;
using Clock = std::chrono::steady_clock;
namespace t = codegym::testing;

namespace {

const core::Registry& reg() { return t::fixture_registry(); }

std::vector<std::string> builtin_names() { return envs::builtin_registry().names(); }

// Collects failure notes for one check.
struct Check {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok && problems.size() < 5) problems.push_back(what);
    if (!ok) ++failures;
  }
  int failures = 0;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------- 1 ----------

void worked_example(Check& c, std::string& detail) {
  const auto t0 = Clock::now();
  const auto tr = envs::oracle_solve(reg(), "LargestRectangleEnv", TaskConfig(Json{{"heights", {2, 1, 5, 6, 2, 3}}}));
  const double secs = seconds_since(t0);
  c.expect(!tr.calls.empty() && tr.calls.back().name == "Done", "last call is not Done");
  c.expect(!tr.calls.empty() && tr.calls.back().parameters.value("answer", Json()) == 10, "answer is not 10");
  c.expect(!tr.results.empty() && tr.results.back().finished && tr.results.back().reward == 1, "reward is not 1");
  c.expect(secs < 1.0, "took " + std::to_string(secs) + " s");
  detail = std::to_string(tr.calls.size()) + " calls, " + std::to_string(secs * 1000) + " ms";
}

// ---------- 2 ----------

void check_episode_shape(Check& c, const std::string& env, const std::vector<core::StepResult>& results) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const bool last = i + 1 == results.size();
    c.expect(r.finished == last, env + ": finished flag before the last step");
    c.expect(r.reward.has_value() == r.finished, env + ": reward present on a non-terminal step");
    if (r.reward) c.expect(*r.reward == 0 || *r.reward == 1, env + ": non-binary reward");
  }
}

void template_conformance(Check& c, std::string& detail) {
  int episodes = 0;
  for (const auto& name : builtin_names()) {
    const auto& env = reg().at(name);
    const auto configs = envs::generate_default_suite(env, 11);
    c.expect(configs.size() == 30, name + ": suite size");
    for (const auto& config : configs) {
      const auto tr = envs::oracle_solve(env, config);
      check_episode_shape(c, name, tr.results);
      ++episodes;
      // A wrong final answer must still end with a binary reward of 0.
      core::EnvInstance wrong(env, config, Variant::Standard);
      std::vector<core::StepResult> results;
      for (std::size_t i = 0; i + 1 < tr.calls.size(); ++i) results.push_back(wrong.step(tr.calls[i]));
      results.push_back(wrong.step(ActionCall{"Done", Json{{"answer", nullptr}}}));
      check_episode_shape(c, name, results);
      c.expect(results.back().reward == 0, name + ": wrong answer rewarded");
      ++episodes;
    }
  }
  detail = std::to_string(episodes) + " episodes";
}

// ---------- 3 ----------

void oracle_completeness(Check& c, std::string& detail) {
  const auto t0 = Clock::now();
  double standard = 0, hard = 0;
  int n_standard = 0, n_hard = 0;
  for (const auto& name : builtin_names()) {
    const auto& env = reg().at(name);
    for (const auto& config : envs::generate_default_suite(env, 5)) {
      const auto tr = envs::oracle_solve(env, config, Variant::Standard);
      standard += tr.results.back().reward.value_or(0);
      c.expect(tr.results.back().calls_used <= 256, name + ": standard budget overrun");
      ++n_standard;
    }
    for (const auto& config : envs::generate_hard_unit_tests(env, 5, 30)) {
      const auto tr = envs::oracle_solve(env, config, Variant::Hard);
      hard += tr.results.back().reward.value_or(0);
      c.expect(tr.results.back().calls_used <= 512, name + ": hard budget overrun");
      ++n_hard;
    }
  }
  const double secs = seconds_since(t0);
  c.expect(standard == n_standard, "standard mean " + std::to_string(standard / n_standard));
  c.expect(hard == n_hard, "hard mean " + std::to_string(hard / n_hard));
  c.expect(secs < 300, "took " + std::to_string(secs) + " s");
  detail = "standard " + std::to_string(n_standard) + ", hard " + std::to_string(n_hard) + " episodes in " +
           std::to_string(secs) + " s";
}

// ---------- 4 ----------

std::string letters(const std::vector<std::int64_t>& seq) {
  std::string s;
  for (auto v : seq) s.push_back(static_cast<char>('a' + v));
  return s;
}

void reference_equivalence(Check& c, std::string& detail) {
  long compared = 0;
  int mismatches = 0;
  auto same = [&](bool ok) {
    ++compared;
    if (!ok) ++mismatches;
  };
  t::for_each_sequence({-2, 0, 1, 3}, 8, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty() || !std::is_sorted(seq.begin(), seq.end())) return;
    for (std::int64_t k = -4; k <= 5; ++k) same(envs::closest_number_ref(seq, k) == t::brute_closest(seq, k));
  });
  t::for_each_sequence({0, 1, 2, 3}, 8, [&](const std::vector<std::int64_t>& seq) {
    if (!seq.empty()) same(envs::largest_rectangle_ref(seq) == t::brute_rectangle(seq));
  });
  t::for_each_sequence({0, 3, 10}, 8, [&](const std::vector<std::int64_t>& seq) {
    if (!seq.empty()) same(envs::mode_finding_ref(seq) == t::brute_modes(seq));
  });
  std::vector<std::string> words;
  t::for_each_sequence({0, 1}, 8, [&](const std::vector<std::int64_t>& seq) { words.push_back(letters(seq)); });
  for (const auto& a : words) {
    for (const auto& b : words) {
      if (a.size() + b.size() <= 12) same(envs::edit_distance_ref(a, b) == t::brute_edit_distance(a, b));
    }
  }

  Rng rng(4096);
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform(1, 200));
    std::vector<std::int64_t> v(n);
    for (auto& x : v) x = rng.uniform(-1000, 1000);
    std::vector<std::int64_t> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const auto k = rng.uniform(-1100, 1100);
    same(envs::closest_number_ref(sorted, k) == t::brute_closest(sorted, k));
    std::vector<std::int64_t> heights(n);
    for (auto& x : heights) x = rng.uniform(0, 10000);
    same(envs::largest_rectangle_ref(heights) == t::brute_rectangle(heights));
    std::vector<std::int64_t> scores(n);
    for (auto& x : scores) x = rng.uniform(0, 10);
    same(envs::mode_finding_ref(scores) == t::brute_modes(scores));
    std::string a, b;
    for (auto len = rng.uniform(0, 15); len > 0; --len) a.push_back(static_cast<char>('a' + rng.uniform(0, 25)));
    for (auto len = rng.uniform(0, 15); len > 0; --len) b.push_back(static_cast<char>('a' + rng.uniform(0, 25)));
    same(envs::edit_distance_ref(a, b) == t::brute_edit_distance(a, b));
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
  detail = std::to_string(compared) + " comparisons, " + std::to_string(mismatches) + " mismatches";
}

// ---------- 5 ----------

void trial_then_overwrite(Check& c, std::string& detail) {
  exec::ProcessPoolExecutor pool(reg(), 2);
  const exec::ExecLimits limits{50ms, std::size_t{64} << 20};
  const std::vector<std::string> faults{"Spin", "Crash", "Hog", "Throw"};
  Rng rng(2025);
  int injected = 0;
  int steps = 0;
  double worst_fault_ms = 0;
  // Two hard-variant episodes of 500 calls each (budget 512).
  for (int episode = 0; episode < 2; ++episode) {
    core::EnvInstance live(reg().at("FaultFixtureEnv"), TaskConfig(Json{{"target", 3 + episode}}), Variant::Hard);
    core::EnvInstance replay(reg().at("FaultFixtureEnv"), TaskConfig(Json{{"target", 3 + episode}}), Variant::Hard);
    for (int i = 0; i < 500; ++i, ++steps) {
      if (rng.bernoulli(0.2)) {
        const auto& tool = faults[static_cast<std::size_t>(rng.uniform(0, 3))];
        const auto t0 = Clock::now();
        const auto out = pool.guarded_step(live, ActionCall{tool, Json::object()}, limits);
        const auto elapsed = Clock::now() - t0;
        worst_fault_ms = std::max(worst_fault_ms, std::chrono::duration<double, std::milli>(elapsed).count());
        c.expect(elapsed <= limits.wall_time + exec::kGrace, tool + " exceeded wall time plus grace");
        c.expect(!out.committed(), tool + " was committed");
        replay.charge_failed_dispatch("no-op");
        ++injected;
      } else {
        const ActionCall add{"Add", Json{{"x", rng.uniform(-5, 5)}}};
        const auto out = pool.guarded_step(live, add, limits);
        c.expect(out.result == replay.step(add), "clean step diverged");
      }
    }
    c.expect(live.state_json() == replay.state_json(), "final state differs from fault-free replay");
    c.expect(live.budget() == replay.budget(), "budget differs from fault-free replay");
  }
  detail = std::to_string(steps) + " steps, " + std::to_string(injected) + " faults, slowest fault " +
           std::to_string(worst_fault_ms) + " ms, " + std::to_string(pool.respawns()) + " respawns";
}

// ---------- 6 ----------

class PlusTwoApi final : public core::ToolApi {
 public:
  explicit PlusTwoApi(core::ToolApi& inner) : inner_(inner) {}
  using core::ToolApi::call;
  core::StepResult call(const ActionCall& call) override {
    if (call.name != "Done") return inner_.call(call);
    return inner_.call("Done", Json{{"answer", shift(call.parameters.at("answer"))}});
  }

 private:
  static Json shift(const Json& v) {
    if (v.is_number_integer()) return v.get<std::int64_t>() + 2;
    if (!v.is_array()) return v;
    Json out = Json::array();
    for (const auto& e : v) out.push_back(shift(e));
    return out;
  }
  core::ToolApi& inner_;
};

void pass_at_k(Check& c, std::string& detail) {
  int suites = 0;
  for (const auto& name : builtin_names()) {
    const auto& env = reg().at(name);
    const auto configs = envs::generate_unit_tests(env, 21, 9);

    auto with_oracle = verify::mutant_suite(env);
    with_oracle.push_back(verify::oracle_candidate(env));
    const auto a = verify::check_solvability(reg(), name, configs, with_oracle, 10);
    c.expect(a.solvable && a.oracle_index == 9u, name + ": mutants + oracle not solved by the oracle");

    auto without = verify::mutant_suite(env);
    without.push_back({"plus-two", [&env](core::ToolApi& api) {
                         PlusTwoApi wrapped(api);
                         env.solve(wrapped);
                       }});
    const auto b = verify::check_solvability(reg(), name, configs, without, 10);
    c.expect(!b.solvable, name + ": ten mutants reported solvable");
    suites += 2;
  }
  const auto& no_done = reg().at("NoDoneFixtureEnv");
  const auto u = verify::check_solvability(reg(), "NoDoneFixtureEnv",
                                           {TaskConfig(Json{{"target", 4}}), TaskConfig(Json{{"target", 7}})},
                                           verify::default_candidates(no_done), 10);
  c.expect(!u.solvable, "unsolvable fixture reported solvable");
  detail = std::to_string(suites + 1) + " candidate suites";
}

// ---------- 7 ----------

void filter_boundaries(Check& c, std::string& detail) {
  using curate::RejectReason;
  auto cx = [](int calls, int tools) { return curate::apply_complexity_filter({calls, tools}); };
  c.expect(cx(9, 5).reason == RejectReason::TooFewCalls, "9 calls accepted");
  c.expect(cx(10, 5).accepted, "10 calls rejected");
  c.expect(cx(256, 5).accepted, "256 calls rejected");
  c.expect(cx(257, 5).reason == RejectReason::TooManyCalls, "257 calls accepted");
  c.expect(cx(50, 3).reason == RejectReason::TooFewTools, "3 tools accepted");
  c.expect(cx(50, 4).accepted, "4 tools rejected");
  c.expect(curate::apply_difficulty_filter(0.24).accepted, "pass rate 0.24 rejected");
  c.expect(curate::apply_difficulty_filter(0.25).accepted, "pass rate 0.25 rejected");
  c.expect(curate::apply_difficulty_filter(0.26).reason == RejectReason::TooEasy, "pass rate 0.26 accepted");

  const auto& closest = reg().at("ClosestNumberEnv");
  std::vector<std::string> manifest;
  for (const auto& config : envs::generate_unit_tests(closest, 8, 6)) {
    manifest.push_back(core::encode_env_string("ClosestNumberEnv", config));
  }
  const auto records = curate::curate_records(reg(), manifest, {});
  for (const auto& r : records) {
    c.expect(!r.accepted && r.reject_reason == RejectReason::TooFewTools, "ClosestNumberEnv not rejected for tools");
  }
  detail = "9 boundary cases, " + std::to_string(records.size()) + " ClosestNumberEnv records";
}

// ---------- 8 ----------

void server_scale(Check& c, std::string& detail) {
  constexpr std::size_t kSessions = 256;
  std::vector<std::string> manifest;
  const auto names = builtin_names();
  for (std::size_t i = 0; i < kSessions; ++i) {
    const auto& env = reg().at(names[i % names.size()]);
    const auto config = envs::generate_unit_tests(env, 1000 + i, 3)[i % 3];
    manifest.push_back(core::encode_env_string(env.name(), config));
  }

  // Workers spend most of their time waiting on pipes, so several per core.
  exec::ProcessPoolExecutor pool(reg(), std::max(16u, 4 * std::thread::hardware_concurrency()));
  server::ServerConfig config;
  config.listen = "127.0.0.1:0";
  config.max_sessions = kSessions;
  server::SessionManager sessions(reg(), pool, config);
  server::Server srv(sessions);
  srv.start();

  rollout::BatchOptions opts;
  opts.parallelism = kSessions;
  opts.seed = 9;
  const auto spec = rollout::parse_policy_spec("oracle");
  const auto batch = rollout::run_batch(rollout::tcp_factory("127.0.0.1:" + std::to_string(srv.port())), manifest,
                                        spec, reg(), opts);
  srv.stop();

  // Solo replays through an isolated in-process server.
  exec::InProcessExecutor inproc;
  server::SessionManager solo_sessions(reg(), inproc, server::ServerConfig{});
  rollout::LocalConnection solo_conn(solo_sessions);
  int interference = 0;
  std::vector<double> latencies;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& tr = batch.trajectories[i];
    auto policy = rollout::make_policy(spec, reg());
    const auto solo = rollout::run_episode(solo_conn, manifest[i], Variant::Standard, *policy,
                                           rollout::episode_seed(opts.seed, manifest[i], 0));
    if (tr.aborted || tr.reward != 1 || !tr.same_record(solo)) ++interference;
    for (auto l : tr.step_latency) latencies.push_back(std::chrono::duration<double, std::milli>(l).count());
  }
  std::sort(latencies.begin(), latencies.end());
  const double p99 =
      latencies.empty() ? 0 : latencies[static_cast<std::size_t>(std::ceil(0.99 * latencies.size())) - 1];
  const double p50 = latencies.empty() ? 0 : latencies[latencies.size() / 2];
  c.expect(batch.trajectories.size() == kSessions, "wrong trajectory count");
  c.expect(interference == 0, std::to_string(interference) + " sessions differ from solo runs");
  c.expect(p99 < 50.0, "p99 step latency " + std::to_string(p99) + " ms");
  detail = std::to_string(kSessions) + " sessions, " + std::to_string(latencies.size()) + " steps, p50 " +
           std::to_string(p50) + " ms, p99 " +
           std::to_string(p99) + " ms, " + std::to_string(std::thread::hardware_concurrency()) + " cpu";
}

// ---------- 9 ----------

std::string random_message(Rng& rng) {
  static const std::vector<std::string> pieces{
      "<|FunctionCallBegin|>", "<|FunctionCallEnd|>", "[", "]", "{", "}", "\"name\"", "\"parameters\"", ":", ",",
      "\"Observe\"", "\"Done\"", "\"answer\"", "1e999", "-0", "null", "true", "\\u0000", "\\", "\"", " ", "\n",
      "<|FunctionCall", "Begin|>", "\xff\xfe", "\xe2\x82", "[[[[[[[[", "0x10"};
  std::string s;
  if (rng.bernoulli(0.2)) {
    // A valid call, sometimes cut short.
    s = protocol::wrap_call(ActionCall{"Add", Json{{"x", rng.uniform(-9, 9)}}});
    if (rng.bernoulli(0.5)) s.resize(static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(s.size()))));
  } else if (rng.bernoulli(0.5)) {
    for (auto n = rng.uniform(0, 64); n > 0; --n) s.push_back(static_cast<char>(rng.uniform(0, 255)));
  } else {
    for (auto n = rng.uniform(0, 24); n > 0; --n) s += pieces[static_cast<std::size_t>(rng.uniform(0, 27))];
  }
  return s;
}

void protocol_check(Check& c, std::string& detail) {
  const auto documented = protocol::extract_function_call(
      R"(<|FunctionCallBegin|>[{"name":"function_name","parameters":{"key1":"value1","key2":"value2"}}]<|FunctionCallEnd|>)");
  c.expect(documented.ok() && *documented.call ==
                                  ActionCall{"function_name", Json{{"key1", "value1"}, {"key2", "value2"}}},
           "documented payload did not parse exactly");

  Rng rng(99);
  int aborts = 0;
  int parsed = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto text = random_message(rng);
    try {
      const auto m = protocol::extract_function_call(text);
      if (m.ok() == m.failure.has_value()) ++aborts;
      if (m.ok()) ++parsed;
    } catch (...) {
      ++aborts;
    }
  }
  c.expect(aborts == 0, std::to_string(aborts) + " aborts");
  detail = "100000 inputs, " + std::to_string(parsed) + " parsed, " + std::to_string(aborts) + " aborts";
}

struct Criterion {
  const char* name;
  std::function<void(Check&, std::string&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"worked-example", worked_example},
      {"template-conformance", template_conformance},
      {"oracle-completeness", oracle_completeness},
      {"reference-equivalence", reference_equivalence},
      {"trial-then-overwrite", trial_then_overwrite},
      {"pass-at-k", pass_at_k},
      {"filter-boundaries", filter_boundaries},
      {"server-scale", server_scale},
      {"protocol", protocol_check},
  };
  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    std::string detail;
    try {
      criterion.run(check, detail);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = check.failures == 0;
    if (!ok) ++failed;
    std::ostringstream line;
    line << (ok ? "PASS " : "FAIL ") << criterion.name;
    if (!detail.empty()) line << " (" << detail << ")";
    for (const auto& p : check.problems) line << " [" << p << "]";
    std::printf("%s\n", line.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
