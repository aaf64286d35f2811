#pragma once

#include <map>
#include <string>
#include <vector>

#include "codegym/env_core.hpp"
#include "codegym/rollout.hpp"

namespace codegym::curate {

inline constexpr int kMinOracleCalls = 10;
inline constexpr int kMaxOracleCalls = 256;
inline constexpr int kMinDistinctTools = 4;
inline constexpr double kMaxPassRate = 0.25;
inline constexpr int kDefaultTrials = 4;

struct ComplexityStats {
  int oracle_calls = 0;
  int distinct_tools = 0;

  friend bool operator==(const ComplexityStats&, const ComplexityStats&) = default;
};

enum class RejectReason { None, TooFewCalls, TooManyCalls, TooFewTools, TooEasy };

std::string_view to_string(RejectReason reason);
RejectReason parse_reject_reason(std::string_view text);

struct FilterDecision {
  bool accepted = true;
  RejectReason reason = RejectReason::None;

  friend bool operator==(const FilterDecision&, const FilterDecision&) = default;
};

// Throws OracleFailed or UnknownEnvironment.
ComplexityStats measure_complexity(const core::Registry& registry, std::string_view env_name,
                                   const core::TaskConfig& config,
                                   core::Variant variant = core::Variant::Standard);

// Tool count is checked before call count.
FilterDecision apply_complexity_filter(const ComplexityStats& stats);
// Throws InvalidArgument unless pass_rate is in [0, 1].
FilterDecision apply_difficulty_filter(double pass_rate);

// Fraction of `trials` episodes won by the policy, each with its own seed.
double probe_difficulty(const rollout::ConnectionFactory& connect, const core::Registry& registry,
                        const std::string& env_string, const rollout::PolicySpec& policy, int trials,
                        std::uint64_t seed = 0, core::Variant variant = core::Variant::Standard);

struct CurationRecord {
  std::string env_name;
  std::string config;  // env-string
  ComplexityStats complexity;
  double difficulty_pass_rate = 0;
  bool accepted = false;
  RejectReason reject_reason = RejectReason::None;
};

enum class FilterOrder { ComplexityFirst, DifficultyFirst };

// Combines both decisions. The accept set does not depend on the order;
// the order only picks which reason is reported when both reject.
FilterDecision combine(const FilterDecision& complexity, const FilterDecision& difficulty,
                       FilterOrder order = FilterOrder::ComplexityFirst);

struct CurationSummary {
  std::size_t records = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> by_reason;  // every reason, including None
  double mean_oracle_calls = 0;                  // all records
  double mean_distinct_tools = 0;                // all records
  double accepted_mean_oracle_calls = 0;
  double accepted_mean_distinct_tools = 0;
};

struct CurateOptions {
  rollout::PolicySpec evaluator{rollout::PolicySpec::Kind::NoisyOracle, 0.5, {}};
  int trials = kDefaultTrials;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  core::Variant variant = core::Variant::Standard;
};

// Curates every manifest line; records come back in input order.
std::vector<CurationRecord> curate_records(const core::Registry& registry,
                                           const std::vector<std::string>& manifest,
                                           const CurateOptions& options);

CurationSummary summarize(const std::vector<CurationRecord>& records);

// Reads the manifest, writes one record per line to out_path and the
// summary to out_path + ".summary.json". Throws ManifestParseError or
// IoFailure.
CurationSummary curate_corpus(const core::Registry& registry, const std::string& manifest_path,
                              const CurateOptions& options, const std::string& out_path);

Json to_json(const CurationRecord& record);
CurationRecord record_from_json(const Json& value);
Json to_json(const CurationSummary& summary);

}  // namespace codegym::curate
