#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "codegym/env_core.hpp"
#include "codegym/executor.hpp"

namespace codegym::verify {

inline constexpr int kDefaultK = 10;

// A candidate solution: drives an episode through the public tool API.
using Solver = std::function<void(core::ToolApi&)>;

struct Candidate {
  std::string id;
  Solver solve;
};

enum class Verdict { Pass, WrongAnswer, Timeout, MemoryExceeded, Fault, BudgetExhausted };

std::string_view to_string(Verdict verdict);

struct TestOutcome {
  core::TaskConfig config;
  Verdict verdict = Verdict::Fault;
  int calls_used = 0;
  std::chrono::microseconds wall_time{0};
  Json answer;         // last submitted answer, null if none
  std::string detail;  // diagnostic for non-Pass verdicts
};

struct VerifyOptions {
  // Per-call limits. A whole episode gets wall_time x budget.
  exec::ExecLimits limits;
  // Run each episode in a forked child so hangs and crashes are contained.
  bool isolate = true;
  std::size_t parallelism = 1;
};

// Throws UnknownEnvironment.
TestOutcome run_unit_test(const core::Registry& registry, std::string_view env_name,
                          const core::TaskConfig& config, const Solver& solver,
                          core::Variant variant = core::Variant::Standard,
                          const VerifyOptions& options = {});

struct CorrectnessReport {
  std::string env_name;
  std::vector<TestOutcome> outcomes;  // one per config, input order
  std::vector<std::size_t> flagged;   // indices of non-Pass outcomes
  bool faulty = false;
};

// Runs the environment's own oracle on every config. Throws
// UnknownEnvironment, or InvalidArgument for an empty config list.
CorrectnessReport check_correctness(const core::Registry& registry, std::string_view env_name,
                                    const std::vector<core::TaskConfig>& configs,
                                    core::Variant variant = core::Variant::Standard,
                                    const VerifyOptions& options = {});

struct CandidateResult {
  std::string id;
  int passed = 0;
  int tests = 0;
};

struct SolvabilityReport {
  std::string env_name;
  int k_used = 0;  // candidates actually evaluated
  std::vector<CandidateResult> candidates;
  bool solvable = false;
  std::optional<std::size_t> oracle_index;  // first candidate passing every test
  std::optional<std::string> oracle_id;
};

// Evaluates candidates in order and stops after the first one that passes
// every config. Requires 1 <= |candidates| <= k and non-empty configs.
SolvabilityReport check_solvability(const core::Registry& registry, std::string_view env_name,
                                    const std::vector<core::TaskConfig>& configs,
                                    const std::vector<Candidate>& candidates, int k = kDefaultK,
                                    core::Variant variant = core::Variant::Standard,
                                    const VerifyOptions& options = {});

// The environment's oracle as a candidate.
Candidate oracle_candidate(const core::Environment& env);

// Sabotaged copies of the oracle. Each rewrites (or suppresses) the answer
// the oracle submits, so it can never match the reference.
enum class Mutation {
  PlusOne,
  MinusOne,
  Complement,   // -x - 1
  XorOne,
  AsString,
  NeverDone,
  Null,
  WrapInList,
  AddMillion,
};

inline constexpr Mutation kAllMutations[] = {
    Mutation::PlusOne, Mutation::MinusOne, Mutation::Complement, Mutation::XorOne,    Mutation::AsString,
    Mutation::NeverDone, Mutation::Null,   Mutation::WrapInList, Mutation::AddMillion,
};

std::string_view to_string(Mutation mutation);

Candidate mutant_candidate(const core::Environment& env, Mutation mutation);
// The nine mutants, in kAllMutations order.
std::vector<Candidate> mutant_suite(const core::Environment& env);
// The first k-1 mutants followed by the oracle.
std::vector<Candidate> default_candidates(const core::Environment& env, int k = kDefaultK);

Json to_json(const TestOutcome& outcome);
Json to_json(const CorrectnessReport& report);
Json to_json(const SolvabilityReport& report);

}  // namespace codegym::verify
