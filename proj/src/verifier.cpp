#include "codegym/verifier.hpp"

#include <atomic>
#include <thread>

namespace codegym::verify {

namespace {

using Clock = std::chrono::steady_clock;

// Forwards calls and remembers the last answer handed to Done.
class CapturingApi final : public core::ToolApi {
 public:
  explicit CapturingApi(core::EnvInstance& instance) : instance_(instance) {}
  using ToolApi::call;

  core::StepResult call(const core::ActionCall& call) override {
    if (call.name == "Done" && call.parameters.is_object() && call.parameters.contains("answer")) {
      answer = call.parameters.at("answer");
    }
    return instance_.step(call);
  }

  Json answer;

 private:
  core::EnvInstance& instance_;
};

Json transform_number(const Json& x, Mutation m) {
  if (x.is_array()) {
    Json out = Json::array();
    for (const auto& e : x) out.push_back(transform_number(e, m));
    return out;
  }
  if (!x.is_number_integer()) {
    if (!x.is_number()) return x;
    const double v = x.get<double>();
    switch (m) {
      case Mutation::PlusOne: return v + 1;
      case Mutation::MinusOne: return v - 1;
      case Mutation::Complement: return -v - 1;
      case Mutation::XorOne: return v + 0.5;
      case Mutation::AddMillion: return v + 1e6;
      default: return x;
    }
  }
  const auto v = x.get<std::int64_t>();
  switch (m) {
    case Mutation::PlusOne: return v + 1;
    case Mutation::MinusOne: return v - 1;
    case Mutation::Complement: return -v - 1;
    case Mutation::XorOne: return v ^ 1;
    case Mutation::AddMillion: return v + 1000000;
    default: return x;
  }
}

Json mutate_answer(const Json& answer, Mutation m) {
  switch (m) {
    case Mutation::AsString: return canonical_dump(answer);
    case Mutation::Null: return nullptr;
    case Mutation::WrapInList: return Json::array({answer});
    default: return transform_number(answer, m);
  }
}

// Interposes on the oracle's Done call.
class MutatingApi final : public core::ToolApi {
 public:
  MutatingApi(core::ToolApi& inner, Mutation mutation) : inner_(inner), mutation_(mutation) {}
  using ToolApi::call;

  core::StepResult call(const core::ActionCall& call) override {
    if (call.name != "Done") return inner_.call(call);
    if (mutation_ == Mutation::NeverDone) {
      return core::StepResult{"Answer withheld.", std::nullopt, false, 0};
    }
    core::ActionCall changed = call;
    if (changed.parameters.contains("answer")) {
      changed.parameters["answer"] = mutate_answer(changed.parameters.at("answer"), mutation_);
    }
    return inner_.call(changed);
  }

 private:
  core::ToolApi& inner_;
  Mutation mutation_;
};

Verdict verdict_from_string(std::string_view text) {
  for (auto v : {Verdict::Pass, Verdict::WrongAnswer, Verdict::Timeout, Verdict::MemoryExceeded,
                 Verdict::Fault, Verdict::BudgetExhausted}) {
    if (to_string(v) == text) return v;
  }
  return Verdict::Fault;
}

// Runs the episode in the current process and classifies it.
Json run_episode_inline(const core::Environment& env, const core::TaskConfig& config,
                        const Solver& solver, core::Variant variant) {
  core::EnvInstance instance(env, config, variant);
  CapturingApi api(instance);
  std::string thrown;
  try {
    solver(api);
  } catch (const std::bad_alloc&) {
    throw;
  } catch (const std::exception& e) {
    thrown = e.what();
  }

  Verdict verdict;
  std::string detail;
  if (instance.finished()) {
    if (instance.final_reward().value_or(0) == 1) {
      verdict = Verdict::Pass;
    } else if (instance.budget() == 0) {
      verdict = Verdict::BudgetExhausted;
      detail = "tool budget exhausted";
    } else {
      verdict = Verdict::WrongAnswer;
      detail = "submitted " + canonical_dump(api.answer);
    }
  } else if (!thrown.empty()) {
    verdict = Verdict::Fault;
    detail = thrown;
  } else {
    verdict = Verdict::BudgetExhausted;
    detail = "solver stopped without a terminal reward";
  }
  return Json{{"verdict", to_string(verdict)},
              {"calls_used", instance.calls_used()},
              {"answer", api.answer},
              {"detail", detail}};
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t parallelism, Fn&& fn) {
  const auto threads = std::min(std::max<std::size_t>(parallelism, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (auto i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Pass: return "Pass";
    case Verdict::WrongAnswer: return "WrongAnswer";
    case Verdict::Timeout: return "Timeout";
    case Verdict::MemoryExceeded: return "MemoryExceeded";
    case Verdict::Fault: return "Fault";
    case Verdict::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

std::string_view to_string(Mutation mutation) {
  switch (mutation) {
    case Mutation::PlusOne: return "plus-one";
    case Mutation::MinusOne: return "minus-one";
    case Mutation::Complement: return "complement";
    case Mutation::XorOne: return "xor-one";
    case Mutation::AsString: return "as-string";
    case Mutation::NeverDone: return "never-done";
    case Mutation::Null: return "null";
    case Mutation::WrapInList: return "wrap-in-list";
    case Mutation::AddMillion: return "add-million";
  }
  return "?";
}

TestOutcome run_unit_test(const core::Registry& registry, std::string_view env_name,
                          const core::TaskConfig& config, const Solver& solver, core::Variant variant,
                          const VerifyOptions& options) {
  const auto& env = registry.at(env_name);
  exec::validate(options.limits);
  TestOutcome out;
  out.config = config;
  out.answer = nullptr;
  const auto start = Clock::now();

  Json result;
  if (options.isolate) {
    const auto episode_time = options.limits.wall_time * core::initial_budget(variant);
    const auto child = exec::run_in_child(
        [&] { return run_episode_inline(env, config, solver, variant).dump(); }, episode_time,
        options.limits.memory);
    switch (child.status) {
      case exec::ChildResult::Status::Ok: result = Json::parse(child.payload); break;
      case exec::ChildResult::Status::Timeout:
        out.verdict = Verdict::Timeout;
        out.detail = "episode exceeded " + std::to_string(episode_time.count()) + " ms";
        break;
      case exec::ChildResult::Status::MemoryExceeded:
        out.verdict = Verdict::MemoryExceeded;
        out.detail = "memory limit exceeded";
        break;
      case exec::ChildResult::Status::Fault:
        out.verdict = Verdict::Fault;
        out.detail = child.payload.empty() ? "episode process crashed" : child.payload;
        break;
    }
  } else {
    try {
      result = run_episode_inline(env, config, solver, variant);
    } catch (const std::bad_alloc&) {
      out.verdict = Verdict::MemoryExceeded;
    }
  }

  if (!result.is_null()) {
    out.verdict = verdict_from_string(result.at("verdict").get<std::string>());
    out.calls_used = result.at("calls_used").get<int>();
    out.answer = result.at("answer");
    out.detail = result.at("detail").get<std::string>();
    // A pass must survive an independent comparison against the reference.
    if (out.verdict == Verdict::Pass &&
        !core::answers_equal(env.canonical_answer(out.answer),
                             env.canonical_answer(env.reference_answer(config)))) {
      out.verdict = Verdict::WrongAnswer;
      out.detail = "reward 1 but the answer differs from the reference";
    }
  }
  out.wall_time = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
  return out;
}

CorrectnessReport check_correctness(const core::Registry& registry, std::string_view env_name,
                                    const std::vector<core::TaskConfig>& configs, core::Variant variant,
                                    const VerifyOptions& options) {
  const auto& env = registry.at(env_name);
  if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "no unit tests to check");
  const auto oracle = oracle_candidate(env);
  CorrectnessReport report;
  report.env_name = std::string(env_name);
  report.outcomes.resize(configs.size());
  parallel_for(configs.size(), options.parallelism, [&](std::size_t i) {
    report.outcomes[i] = run_unit_test(registry, env_name, configs[i], oracle.solve, variant, options);
  });
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    if (report.outcomes[i].verdict != Verdict::Pass) report.flagged.push_back(i);
  }
  report.faulty = !report.flagged.empty();
  return report;
}

SolvabilityReport check_solvability(const core::Registry& registry, std::string_view env_name,
                                    const std::vector<core::TaskConfig>& configs,
                                    const std::vector<Candidate>& candidates, int k,
                                    core::Variant variant, const VerifyOptions& options) {
  registry.at(env_name);
  if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "no unit tests to check");
  if (candidates.empty() || static_cast<int>(candidates.size()) > k) {
    throw Error(ErrorCode::InvalidArgument, "need between 1 and k=" + std::to_string(k) + " candidates");
  }
  SolvabilityReport report;
  report.env_name = std::string(env_name);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::vector<char> passed(configs.size(), 0);
    parallel_for(configs.size(), options.parallelism, [&](std::size_t i) {
      passed[i] = run_unit_test(registry, env_name, configs[i], candidates[c].solve, variant, options)
                      .verdict == Verdict::Pass;
    });
    CandidateResult result{candidates[c].id, 0, static_cast<int>(configs.size())};
    for (char p : passed) result.passed += p;
    report.candidates.push_back(result);
    ++report.k_used;
    if (result.passed == result.tests) {
      report.solvable = true;
      report.oracle_index = c;
      report.oracle_id = candidates[c].id;
      break;
    }
  }
  return report;
}

Candidate oracle_candidate(const core::Environment& env) {
  return Candidate{"oracle", [&env](core::ToolApi& api) { env.solve(api); }};
}

Candidate mutant_candidate(const core::Environment& env, Mutation mutation) {
  return Candidate{"mutant:" + std::string(to_string(mutation)), [&env, mutation](core::ToolApi& api) {
                     MutatingApi mutated(api, mutation);
                     env.solve(mutated);
                   }};
}

std::vector<Candidate> mutant_suite(const core::Environment& env) {
  std::vector<Candidate> out;
  for (auto m : kAllMutations) out.push_back(mutant_candidate(env, m));
  return out;
}

std::vector<Candidate> default_candidates(const core::Environment& env, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  auto mutants = mutant_suite(env);
  std::vector<Candidate> out;
  for (int i = 0; i < k - 1 && i < static_cast<int>(mutants.size()); ++i) out.push_back(mutants[static_cast<std::size_t>(i)]);
  out.push_back(oracle_candidate(env));
  return out;
}

Json to_json(const TestOutcome& o) {
  return Json{{"config", o.config.entries()},
              {"verdict", to_string(o.verdict)},
              {"calls_used", o.calls_used},
              {"wall_time_ms", static_cast<double>(o.wall_time.count()) / 1000.0},
              {"answer", o.answer},
              {"detail", o.detail}};
}

Json to_json(const CorrectnessReport& r) {
  Json flagged = Json::array();
  for (auto i : r.flagged) {
    auto entry = to_json(r.outcomes[i]);
    entry["index"] = i;
    flagged.push_back(std::move(entry));
  }
  return Json{{"env_name", r.env_name},
              {"tests", r.outcomes.size()},
              {"faulty", r.faulty},
              {"flagged", std::move(flagged)}};
}

Json to_json(const SolvabilityReport& r) {
  Json candidates = Json::array();
  for (const auto& c : r.candidates) {
    candidates.push_back(Json{{"id", c.id}, {"passed", c.passed}, {"tests", c.tests}});
  }
  return Json{{"env_name", r.env_name},
              {"k_used", r.k_used},
              {"candidates", std::move(candidates)},
              {"solvable", r.solvable},
              {"oracle_id", r.oracle_index ? Json(*r.oracle_index) : Json(nullptr)},
              {"oracle_name", r.oracle_id ? Json(*r.oracle_id) : Json(nullptr)}};
}

}  // namespace codegym::verify
