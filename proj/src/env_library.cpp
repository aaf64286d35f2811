#include "codegym/env_library.hpp"

#include <array>
#include <set>

#include "codegym/rng.hpp"

namespace codegym::envs {

namespace {

struct TierRow {
  std::string_view env;
  std::array<TierBounds, 4> bounds;  // easy, medium, hard, scaled
};

// Sizes are list lengths (string lengths for edit distance); values are
// element ranges (alphabet size for edit distance). Rectangle and edit
// distance cannot grow 10x in size within the 512-call budget, so their
// scaled tier grows magnitude instead.
constexpr std::array<TierRow, 4> kTierTable{{
    {"ClosestNumberEnv",
     {{{1, 10, -100, 100},
       {11, 50, -10'000, 10'000},
       {51, 100, -1'000'000, 1'000'000},
       {1000, 2000, -1'000'000'000, 1'000'000'000}}}},
    {"ModeFindingEnv",
     {{{1, 10, 0, kMaxScore}, {11, 50, 0, kMaxScore}, {100, 200, 0, kMaxScore},
       {2000, 4000, 0, kMaxScore}}}},
    {"LargestRectangleEnv",
     {{{1, 8, 0, 10}, {9, 30, 0, 100}, {31, 80, 0, 1000}, {81, 170, 0, 100'000}}}},
    {"EditDistanceEnv",
     {{{0, 3, 4, 4}, {3, 6, 4, 4}, {7, 10, 4, 4}, {11, 15, 62, 62}}}},
}};

}  // namespace

TierBounds tier_bounds(std::string_view env_name, core::Tier tier) {
  for (const auto& row : kTierTable) {
    if (row.env == env_name) return row.bounds[static_cast<std::size_t>(tier)];
  }
  throw Error(ErrorCode::UnknownEnvironment,
              "no tier table for environment '" + std::string(env_name) + "'");
}

const core::Registry& builtin_registry() {
  static const core::Registry registry = [] {
    core::Registry r;
    r.add(make_closest_number_env());
    r.add(make_largest_rectangle_env());
    r.add(make_mode_finding_env());
    r.add(make_edit_distance_env());
    return r;
  }();
  return registry;
}

OracleTrajectory oracle_solve(const core::Environment& env, const core::TaskConfig& config,
                              core::Variant variant) {
  core::EnvInstance instance(env, config, variant);
  core::RecordingApi api(instance);
  try {
    env.solve(api);
  } catch (const Error& e) {
    throw Error(ErrorCode::OracleFailed, std::string(env.name()) + " oracle aborted: " + e.what());
  }
  OracleTrajectory out;
  out.calls = api.calls();
  out.results = api.results();
  out.private_reads = instance.private_reads();
  out.reward = instance.final_reward().value_or(0);
  if (!out.calls.empty() && out.calls.back().name == "Done") {
    out.answer = out.calls.back().parameters.at("answer");
  }
  if (!instance.finished() || out.reward != 1) {
    throw Error(ErrorCode::OracleFailed,
                std::string(env.name()) + " oracle did not earn reward 1 on " +
                    core::encode_env_string(env.name(), config));
  }
  if (out.private_reads != 0) {
    throw Error(ErrorCode::OracleFailed, std::string(env.name()) + " oracle read private state");
  }
  return out;
}

OracleTrajectory oracle_solve(const core::Registry& registry, std::string_view env_name,
                              const core::TaskConfig& config, core::Variant variant) {
  return oracle_solve(registry.at(env_name), config, variant);
}

namespace {

constexpr int kMaxAttempts = 10'000;

core::TaskConfig fresh_config(const core::Environment& env, core::Tier tier, std::uint64_t seed,
                              std::string_view stream, std::uint64_t index,
                              std::set<std::string>& seen) {
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto s = derive_seed(seed, stream, index * kMaxAttempts + static_cast<std::uint64_t>(attempt));
    auto config = env.generate_config(tier, s);
    if (seen.insert(core::encode_env_string(env.name(), config)).second) return config;
  }
  throw Error(ErrorCode::InvalidArgument,
              "could not generate a unique " + std::string(core::to_string(tier)) + " config for " +
                  std::string(env.name()));
}

std::vector<core::TaskConfig> tiered(const core::Environment& env, std::uint64_t seed, int count,
                                     std::set<std::string>& seen) {
  if (count <= 0 || count % 3 != 0) {
    throw Error(ErrorCode::InvalidArgument, "unit-test count must be a positive multiple of 3");
  }
  std::vector<core::TaskConfig> out;
  const int per_tier = count / 3;
  for (const auto tier : {core::Tier::Easy, core::Tier::Medium, core::Tier::Hard}) {
    const std::string stream = std::string(env.name()) + "/" + std::string(core::to_string(tier));
    for (int i = 0; i < per_tier; ++i) {
      out.push_back(fresh_config(env, tier, seed, stream, static_cast<std::uint64_t>(i), seen));
    }
  }
  return out;
}

}  // namespace

std::vector<core::TaskConfig> generate_unit_tests(const core::Environment& env, std::uint64_t seed,
                                                  int count) {
  std::set<std::string> seen;
  return tiered(env, seed, count, seen);
}

std::vector<core::TaskConfig> generate_default_suite(const core::Environment& env,
                                                     std::uint64_t seed) {
  constexpr int kBatch = 15;
  auto first = generate_unit_tests(env, derive_seed(seed, "batch", 0), kBatch);
  auto second = generate_unit_tests(env, derive_seed(seed, "batch", 1), kBatch);

  std::set<std::string> seen;
  for (const auto& config : first) seen.insert(core::encode_env_string(env.name(), config));
  const std::string stream = std::string(env.name()) + "/replace";
  std::uint64_t replaced = 0;
  for (std::size_t i = 0; i < second.size(); ++i) {
    if (seen.insert(core::encode_env_string(env.name(), second[i])).second) continue;
    const auto tier = static_cast<core::Tier>(i / (kBatch / 3));
    second[i] = fresh_config(env, tier, seed, stream, replaced++, seen);
  }
  first.insert(first.end(), second.begin(), second.end());
  return first;
}

std::vector<core::TaskConfig> generate_hard_unit_tests(const core::Environment& env,
                                                       std::uint64_t seed, int count) {
  if (count <= 0) throw Error(ErrorCode::InvalidArgument, "unit-test count must be positive");
  std::set<std::string> seen;
  std::vector<core::TaskConfig> out;
  const std::string stream = std::string(env.name()) + "/scaled";
  for (int i = 0; i < count; ++i) {
    out.push_back(fresh_config(env, core::Tier::Scaled, seed, stream, static_cast<std::uint64_t>(i), seen));
  }
  return out;
}

}  // namespace codegym::envs
