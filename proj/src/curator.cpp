#include "codegym/curator.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "codegym/env_library.hpp"
#include "codegym/executor.hpp"
#include "codegym/gym_server.hpp"

namespace codegym::curate {

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::None: return "None";
    case RejectReason::TooFewCalls: return "TooFewCalls";
    case RejectReason::TooManyCalls: return "TooManyCalls";
    case RejectReason::TooFewTools: return "TooFewTools";
    case RejectReason::TooEasy: return "TooEasy";
  }
  return "?";
}

RejectReason parse_reject_reason(std::string_view text) {
  for (auto r : {RejectReason::None, RejectReason::TooFewCalls, RejectReason::TooManyCalls,
                 RejectReason::TooFewTools, RejectReason::TooEasy}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown reject reason '" + std::string(text) + "'");
}

ComplexityStats measure_complexity(const core::Registry& registry, std::string_view env_name,
                                   const core::TaskConfig& config, core::Variant variant) {
  const auto& env = registry.at(env_name);
  const auto trajectory = envs::oracle_solve(env, config, variant);
  return ComplexityStats{static_cast<int>(trajectory.calls.size()), static_cast<int>(env.tools().size())};
}

FilterDecision apply_complexity_filter(const ComplexityStats& stats) {
  if (stats.distinct_tools < kMinDistinctTools) return {false, RejectReason::TooFewTools};
  if (stats.oracle_calls < kMinOracleCalls) return {false, RejectReason::TooFewCalls};
  if (stats.oracle_calls > kMaxOracleCalls) return {false, RejectReason::TooManyCalls};
  return {};
}

FilterDecision apply_difficulty_filter(double pass_rate) {
  if (!(pass_rate >= 0.0 && pass_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "pass rate must lie in [0, 1]");
  }
  if (pass_rate > kMaxPassRate) return {false, RejectReason::TooEasy};
  return {};
}

FilterDecision combine(const FilterDecision& complexity, const FilterDecision& difficulty,
                       FilterOrder order) {
  const auto& first = order == FilterOrder::ComplexityFirst ? complexity : difficulty;
  const auto& second = order == FilterOrder::ComplexityFirst ? difficulty : complexity;
  if (!first.accepted) return first;
  return second;
}

double probe_difficulty(const rollout::ConnectionFactory& connect, const core::Registry& registry,
                        const std::string& env_string, const rollout::PolicySpec& policy, int trials,
                        std::uint64_t seed, core::Variant variant) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  registry.at(core::parse_env_string(env_string).first);
  auto connection = connect();
  auto agent = rollout::make_policy(policy, registry);
  int wins = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto t = rollout::run_episode(*connection, env_string, variant, *agent,
                                        rollout::episode_seed(seed, env_string, trial));
    if (t.aborted) throw Error(ErrorCode::ServerError, "difficulty probe aborted: " + t.error);
    wins += t.reward;
  }
  return static_cast<double>(wins) / trials;
}

std::vector<CurationRecord> curate_records(const core::Registry& registry,
                                           const std::vector<std::string>& manifest,
                                           const CurateOptions& options) {
  // The evaluator plays through an in-process server so it sees exactly
  // what a remote agent would.
  exec::InProcessExecutor executor;
  server::ServerConfig config;
  config.max_sessions = std::max<std::size_t>(options.parallelism, 1) * 2 + 8;
  server::SessionManager sessions(registry, executor, config);
  const auto connect = rollout::local_factory(sessions);

  std::vector<CurationRecord> records(manifest.size());
  std::vector<std::exception_ptr> errors(manifest.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (auto i = next++; i < manifest.size(); i = next++) {
      try {
        auto [name, cfg] = core::parse_env_string(manifest[i]);
        CurationRecord r;
        r.env_name = name;
        r.config = core::encode_env_string(name, cfg);
        r.complexity = measure_complexity(registry, name, cfg, options.variant);
        r.difficulty_pass_rate =
            probe_difficulty(connect, registry, manifest[i], options.evaluator, options.trials, options.seed,
                             options.variant);
        const auto decision = combine(apply_complexity_filter(r.complexity),
                                      apply_difficulty_filter(r.difficulty_pass_rate));
        r.accepted = decision.accepted;
        r.reject_reason = decision.reason;
        records[i] = std::move(r);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min(std::max<std::size_t>(options.parallelism, 1), std::max<std::size_t>(manifest.size(), 1));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

CurationSummary summarize(const std::vector<CurationRecord>& records) {
  CurationSummary s;
  for (auto r : {RejectReason::None, RejectReason::TooFewCalls, RejectReason::TooManyCalls,
                 RejectReason::TooFewTools, RejectReason::TooEasy}) {
    s.by_reason[std::string(to_string(r))] = 0;
  }
  s.records = records.size();
  double calls = 0;
  double tools = 0;
  double acc_calls = 0;
  double acc_tools = 0;
  for (const auto& r : records) {
    ++s.by_reason[std::string(to_string(r.reject_reason))];
    calls += r.complexity.oracle_calls;
    tools += r.complexity.distinct_tools;
    if (r.accepted) {
      ++s.accepted;
      acc_calls += r.complexity.oracle_calls;
      acc_tools += r.complexity.distinct_tools;
    }
  }
  if (s.records > 0) {
    s.mean_oracle_calls = calls / static_cast<double>(s.records);
    s.mean_distinct_tools = tools / static_cast<double>(s.records);
  }
  if (s.accepted > 0) {
    s.accepted_mean_oracle_calls = acc_calls / static_cast<double>(s.accepted);
    s.accepted_mean_distinct_tools = acc_tools / static_cast<double>(s.accepted);
  }
  return s;
}

CurationSummary curate_corpus(const core::Registry& registry, const std::string& manifest_path,
                              const CurateOptions& options, const std::string& out_path) {
  const auto manifest = rollout::read_manifest(manifest_path);
  const auto records = curate_records(registry, manifest, options);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + out_path);
  for (const auto& r : records) out << canonical_dump(to_json(r)) << '\n';
  if (!out.flush()) throw Error(ErrorCode::IoFailure, "write to " + out_path + " failed");

  const auto summary = summarize(records);
  std::ofstream sum(out_path + ".summary.json", std::ios::binary | std::ios::trunc);
  if (!sum) throw Error(ErrorCode::IoFailure, "cannot write " + out_path + ".summary.json");
  sum << canonical_dump(to_json(summary)) << '\n';
  return summary;
}

Json to_json(const CurationRecord& r) {
  return Json{{"env_name", r.env_name},
              {"config", r.config},
              {"complexity", {{"oracle_calls", r.complexity.oracle_calls},
                              {"distinct_tools", r.complexity.distinct_tools}}},
              {"difficulty_pass_rate", r.difficulty_pass_rate},
              {"accepted", r.accepted},
              {"reject_reason", to_string(r.reject_reason)}};
}

CurationRecord record_from_json(const Json& value) {
  CurationRecord r;
  try {
    r.env_name = value.at("env_name").get<std::string>();
    r.config = value.at("config").get<std::string>();
    r.complexity.oracle_calls = value.at("complexity").at("oracle_calls").get<int>();
    r.complexity.distinct_tools = value.at("complexity").at("distinct_tools").get<int>();
    r.difficulty_pass_rate = value.at("difficulty_pass_rate").get<double>();
    r.accepted = value.at("accepted").get<bool>();
    r.reject_reason = parse_reject_reason(value.at("reject_reason").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ManifestParseError, std::string("bad curation record: ") + e.what());
  }
  return r;
}

Json to_json(const CurationSummary& s) {
  return Json{{"records", s.records},
              {"accepted", s.accepted},
              {"by_reason", s.by_reason},
              {"mean_oracle_calls", s.mean_oracle_calls},
              {"mean_distinct_tools", s.mean_distinct_tools},
              {"accepted_mean_oracle_calls", s.accepted_mean_oracle_calls},
              {"accepted_mean_distinct_tools", s.accepted_mean_distinct_tools}};
}

}  // namespace codegym::curate
