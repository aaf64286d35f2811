#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "codegym/env_core.hpp"

namespace codegym::envs {

// Reference answers. Each throws on the documented precondition violation.

// Element minimizing |x - k|; ties go to the smaller element. Throws
// EmptyInput for an empty array.
std::int64_t closest_number_ref(std::span<const std::int64_t> sorted, std::int64_t k);
// Max over contiguous spans of length * min height. Throws EmptyInput.
std::int64_t largest_rectangle_ref(std::span<const std::int64_t> heights);
// Ascending list of values with maximal frequency. Throws EmptyInput or
// ValueOutOfRange (values must lie in [0, 10]).
std::vector<std::int64_t> mode_finding_ref(std::span<const std::int64_t> scores);
// Levenshtein distance with unit costs.
std::int64_t edit_distance_ref(std::string_view s1, std::string_view s2);

inline constexpr std::int64_t kMaxScore = 10;

std::shared_ptr<const core::Environment> make_closest_number_env();
std::shared_ptr<const core::Environment> make_largest_rectangle_env();
std::shared_ptr<const core::Environment> make_mode_finding_env();
std::shared_ptr<const core::Environment> make_edit_distance_env();

// The four library environments.
const core::Registry& builtin_registry();

// Size and magnitude bounds per tier. Bumped whenever a bound changes so
// manifests can record which table produced them.
inline constexpr std::string_view kTierTableVersion = "2";

struct TierBounds {
  int min_size;
  int max_size;
  std::int64_t min_value;
  std::int64_t max_value;
};

// Throws UnknownEnvironment for environments without a tier table.
TierBounds tier_bounds(std::string_view env_name, core::Tier tier);

struct OracleTrajectory {
  std::vector<core::ActionCall> calls;
  std::vector<core::StepResult> results;
  Json answer;
  int reward = 0;
  std::uint64_t private_reads = 0;
};

// Drives a fresh instance through the oracle. Throws OracleFailed unless the
// episode ends with reward 1 and zero private-state reads.
OracleTrajectory oracle_solve(const core::Environment& env, const core::TaskConfig& config,
                              core::Variant variant = core::Variant::Standard);
OracleTrajectory oracle_solve(const core::Registry& registry, std::string_view env_name,
                              const core::TaskConfig& config,
                              core::Variant variant = core::Variant::Standard);

// count/3 easy, medium and hard configs, deduplicated, deterministic in
// (env, seed). Throws InvalidArgument unless count is a positive multiple
// of 3.
std::vector<core::TaskConfig> generate_unit_tests(const core::Environment& env,
                                                  std::uint64_t seed, int count);
// Two 15-config batches merged with duplicates replaced: 30 configs.
std::vector<core::TaskConfig> generate_default_suite(const core::Environment& env,
                                                     std::uint64_t seed);
// Scaled tier for the hard variant (budget 512).
std::vector<core::TaskConfig> generate_hard_unit_tests(const core::Environment& env,
                                                       std::uint64_t seed, int count);

}  // namespace codegym::envs
