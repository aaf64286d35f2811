#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "codegym/env_library.hpp"
#include "codegym/rng.hpp"
#include "support/oracles.hpp"

using namespace codegym;
using core::TaskConfig;
using core::Tier;
using core::Variant;
namespace t = codegym::testing;

namespace {

const core::Registry& reg() { return envs::builtin_registry(); }

std::vector<std::int64_t> ints(const Json& v) { return v.get<std::vector<std::int64_t>>(); }

std::string letters(const std::vector<std::int64_t>& seq) {
  std::string s;
  for (auto c : seq) s += static_cast<char>('a' + c);
  return s;
}

int count_calls(const envs::OracleTrajectory& tr, std::string_view tool) {
  return static_cast<int>(std::count_if(tr.calls.begin(), tr.calls.end(),
                                         [&](const core::ActionCall& c) { return c.name == tool; }));
}

}  // namespace

// ---------- reference answers on worked examples ----------

TEST(Reference, WorkedExamples) {
  const std::vector<std::int64_t> sorted{1, 3, 5, 8};
  EXPECT_EQ(envs::closest_number_ref(sorted, 6), 5);
  EXPECT_EQ(envs::closest_number_ref(sorted, 4), 3);  // tie 3/5 goes to 3
  EXPECT_EQ(envs::closest_number_ref(sorted, 100), 8);
  EXPECT_EQ(envs::closest_number_ref(sorted, -100), 1);

  const std::vector<std::int64_t> heights{2, 1, 5, 6, 2, 3};
  EXPECT_EQ(envs::largest_rectangle_ref(heights), 10);
  EXPECT_EQ(envs::largest_rectangle_ref(std::vector<std::int64_t>{0}), 0);
  EXPECT_EQ(envs::largest_rectangle_ref(std::vector<std::int64_t>{4, 4, 4}), 12);

  const std::vector<std::int64_t> scores{1, 2, 9, 6, 10, 4, 1, 5, 8, 8, 2, 10, 1, 3, 8, 0, 0, 5, 3, 5};
  EXPECT_EQ(envs::mode_finding_ref(scores), (std::vector<std::int64_t>{1, 5, 8}));

  EXPECT_EQ(envs::edit_distance_ref("kitten", "sitting"), 3);
  EXPECT_EQ(envs::edit_distance_ref("", "abc"), 3);
  EXPECT_EQ(envs::edit_distance_ref("", ""), 0);
  EXPECT_EQ(envs::edit_distance_ref("ab", "cd"), 2);
}

TEST(Reference, PreconditionErrors) {
  const std::vector<std::int64_t> empty;
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ServerError;
  };
  EXPECT_EQ(code([&] { envs::closest_number_ref(empty, 1); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code([&] { envs::largest_rectangle_ref(empty); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code([&] { envs::mode_finding_ref(empty); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code([&] { envs::mode_finding_ref(std::vector<std::int64_t>{11}); }), ErrorCode::ValueOutOfRange);
  EXPECT_EQ(code([&] { envs::mode_finding_ref(std::vector<std::int64_t>{-1}); }), ErrorCode::ValueOutOfRange);
}

// ---------- references against brute force, exhaustively on small inputs ----------

TEST(Reference, ClosestMatchesBruteForceExhaustive) {
  int checked = 0;
  t::for_each_sequence({-3, -1, 0, 2, 3}, 6, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty() || !std::is_sorted(seq.begin(), seq.end())) return;
    for (std::int64_t k = -5; k <= 5; ++k) {
      ASSERT_EQ(envs::closest_number_ref(seq, k), t::brute_closest(seq, k));
      ++checked;
    }
  });
  EXPECT_GT(checked, 1000);
}

TEST(Reference, RectangleMatchesBruteForceExhaustive) {
  t::for_each_sequence({0, 1, 2, 3}, 7, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty()) return;
    ASSERT_EQ(envs::largest_rectangle_ref(seq), t::brute_rectangle(seq));
  });
}

TEST(Reference, ModesMatchBruteForceExhaustive) {
  t::for_each_sequence({0, 5, 10}, 8, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty()) return;
    ASSERT_EQ(envs::mode_finding_ref(seq), t::brute_modes(seq));
  });
}

TEST(Reference, EditDistanceMatchesBruteForceExhaustive) {
  std::vector<std::string> words;
  t::for_each_sequence({0, 1, 2}, 4, [&](const std::vector<std::int64_t>& seq) { words.push_back(letters(seq)); });
  for (const auto& a : words) {
    for (const auto& b : words) ASSERT_EQ(envs::edit_distance_ref(a, b), t::brute_edit_distance(a, b)) << a << "/" << b;
  }
}

TEST(Reference, RandomLargerInputsMatchBruteForce) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto n = rng.uniform(1, 60);
    std::vector<std::int64_t> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(0, 10);
    ASSERT_EQ(envs::mode_finding_ref(v), t::brute_modes(v));
    ASSERT_EQ(envs::largest_rectangle_ref(v), t::brute_rectangle(v));
    for (auto& x : v) x = rng.uniform(-1000, 1000);
    std::sort(v.begin(), v.end());
    const auto k = rng.uniform(-1200, 1200);
    ASSERT_EQ(envs::closest_number_ref(v, k), t::brute_closest(v, k));
    std::string a, b;
    for (auto j = rng.uniform(0, 9); j > 0; --j) a += static_cast<char>('a' + rng.uniform(0, 3));
    for (auto j = rng.uniform(0, 9); j > 0; --j) b += static_cast<char>('a' + rng.uniform(0, 3));
    ASSERT_EQ(envs::edit_distance_ref(a, b), t::brute_edit_distance(a, b)) << a << "/" << b;
  }
}

// Edit distance is a metric; checks the reference on random triples.
TEST(Reference, EditDistanceMetricLaws) {
  Rng rng(8);
  auto word = [&] {
    std::string s;
    for (auto j = rng.uniform(0, 7); j > 0; --j) s += static_cast<char>('a' + rng.uniform(0, 2));
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = word(), b = word(), c = word();
    const auto ab = envs::edit_distance_ref(a, b);
    EXPECT_EQ(ab, envs::edit_distance_ref(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(envs::edit_distance_ref(a, c), ab + envs::edit_distance_ref(b, c));
    EXPECT_GE(ab, std::abs(static_cast<std::int64_t>(a.size()) - static_cast<std::int64_t>(b.size())));
  }
}

// ---------- oracles against exhaustive small inputs ----------

TEST(Oracle, RectangleSolvesEverySmallHistogram) {
  const auto& env = reg().at("LargestRectangleEnv");
  t::for_each_sequence({0, 1, 2, 3}, 5, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty()) return;
    const auto tr = envs::oracle_solve(env, TaskConfig(Json{{"heights", seq}}));
    ASSERT_EQ(tr.answer, t::brute_rectangle(seq));
    ASSERT_EQ(tr.calls.size(), 3 * seq.size() + 2);
  });
}

TEST(Oracle, ClosestSolvesEverySmallArray) {
  const auto& env = reg().at("ClosestNumberEnv");
  t::for_each_sequence({-2, 0, 1, 4}, 5, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty() || !std::is_sorted(seq.begin(), seq.end())) return;
    for (std::int64_t k = -4; k <= 6; ++k) {
      const auto tr = envs::oracle_solve(env, TaskConfig(Json{{"array", seq}, {"k", k}}));
      ASSERT_EQ(tr.answer, t::brute_closest(seq, k));
    }
  });
}

TEST(Oracle, ModeSolvesEverySmallList) {
  const auto& env = reg().at("ModeFindingEnv");
  t::for_each_sequence({0, 3, 10}, 5, [&](const std::vector<std::int64_t>& seq) {
    if (seq.empty()) return;
    const auto tr = envs::oracle_solve(env, TaskConfig(Json{{"scores", seq}}));
    ASSERT_EQ(ints(tr.answer), t::brute_modes(seq));
    ASSERT_EQ(tr.calls.size(), 15u);
  });
}

TEST(Oracle, EditDistanceSolvesEverySmallPair) {
  const auto& env = reg().at("EditDistanceEnv");
  std::vector<std::string> words;
  t::for_each_sequence({0, 1}, 3, [&](const std::vector<std::int64_t>& seq) { words.push_back(letters(seq)); });
  for (const auto& a : words) {
    for (const auto& b : words) {
      const auto tr = envs::oracle_solve(env, TaskConfig(Json{{"s1", a}, {"s2", b}}));
      ASSERT_EQ(tr.answer, t::brute_edit_distance(a, b));
      const auto cells = (a.size() + 1) * (b.size() + 1);
      ASSERT_EQ(tr.calls.size(), 1 + cells + a.size() * b.size() + 1 + 1);
    }
  }
}

TEST(Oracle, EditDistanceTwoByTwoUsesSixteenCalls) {
  const auto tr = envs::oracle_solve(reg(), "EditDistanceEnv", TaskConfig(Json{{"s1", "ab"}, {"s2", "cd"}}));
  EXPECT_EQ(tr.calls.size(), 16u);
  EXPECT_EQ(tr.answer, 2);
}

TEST(Oracle, RectangleWorkedExample) {
  const auto tr = envs::oracle_solve(reg(), "LargestRectangleEnv", TaskConfig(Json{{"heights", {2, 1, 5, 6, 2, 3}}}));
  EXPECT_EQ(tr.answer, 10);
  EXPECT_EQ(tr.reward, 1);
  EXPECT_EQ(tr.calls.size(), 20u);
  EXPECT_EQ(tr.calls.front().name, "Observe");
  EXPECT_EQ(tr.calls.back(), (core::ActionCall{"Done", Json{{"answer", 10}}}));
}

TEST(Oracle, ClosestUsesLogarithmicLookups) {
  const auto& env = reg().at("ClosestNumberEnv");
  for (const auto& config : envs::generate_hard_unit_tests(env, 3, 10)) {
    const auto n = config.at("array").size();
    const auto tr = envs::oracle_solve(env, config, Variant::Hard);
    const int bound = static_cast<int>(std::ceil(std::log2(static_cast<double>(n) + 1))) + 1;
    EXPECT_LE(count_calls(tr, "LookUpPos"), bound) << "n=" << n;
  }
  std::vector<std::int64_t> big(64);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::int64_t>(3 * i);
  for (std::int64_t k : {-5, 0, 50, 95, 96, 500}) {
    const auto tr = envs::oracle_solve(env, TaskConfig(Json{{"array", big}, {"k", k}}));
    EXPECT_LE(count_calls(tr, "LookUpPos"), 8) << k;
    EXPECT_EQ(tr.answer, t::brute_closest(big, k));
  }
}

// ---------- generated suites ----------

class Suite : public ::testing::TestWithParam<std::string> {};

TEST_P(Suite, DefaultSuiteIsThirtyDistinctSolvableConfigs) {
  const auto& env = reg().at(GetParam());
  const auto configs = envs::generate_default_suite(env, 42);
  ASSERT_EQ(configs.size(), 30u);
  std::set<std::string> distinct;
  for (const auto& c : configs) {
    distinct.insert(core::encode_env_string(env.name(), c));
    EXPECT_NO_THROW(env.validate_config(c));
    const auto tr = envs::oracle_solve(env, c);
    EXPECT_EQ(tr.reward, 1);
    EXPECT_EQ(tr.private_reads, 0u);
    EXPECT_LE(tr.calls.size(), 256u);
  }
  EXPECT_EQ(distinct.size(), 30u);
}

TEST_P(Suite, HardSuiteSolvableWithinHardBudget) {
  const auto& env = reg().at(GetParam());
  for (const auto& c : envs::generate_hard_unit_tests(env, 42, 10)) {
    const auto tr = envs::oracle_solve(env, c, Variant::Hard);
    EXPECT_EQ(tr.reward, 1);
    EXPECT_LE(tr.calls.size(), 512u);
  }
}

TEST_P(Suite, GenerationIsDeterministicAndSeedSensitive) {
  const auto& env = reg().at(GetParam());
  EXPECT_EQ(envs::generate_default_suite(env, 7), envs::generate_default_suite(env, 7));
  EXPECT_NE(envs::generate_default_suite(env, 7), envs::generate_default_suite(env, 8));
  EXPECT_EQ(envs::generate_unit_tests(env, 1, 9), envs::generate_unit_tests(env, 1, 9));
  EXPECT_THROW(envs::generate_unit_tests(env, 1, 10), Error);
  EXPECT_THROW(envs::generate_unit_tests(env, 1, 0), Error);
}

TEST_P(Suite, ConfigsRespectTierBounds) {
  const auto& env = reg().at(GetParam());
  for (const auto tier : {Tier::Easy, Tier::Medium, Tier::Hard, Tier::Scaled}) {
    const auto b = envs::tier_bounds(env.name(), tier);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto config = env.generate_config(tier, seed);
      ASSERT_NO_THROW(env.validate_config(config));
      const auto& e = config.entries();
      if (GetParam() == "EditDistanceEnv") {
        for (const char* key : {"s1", "s2"}) {
          const auto len = static_cast<int>(e.at(key).get<std::string>().size());
          ASSERT_GE(len, b.min_size);
          ASSERT_LE(len, b.max_size);
        }
        continue;
      }
      const char* key = GetParam() == "ClosestNumberEnv" ? "array" : GetParam() == "ModeFindingEnv" ? "scores" : "heights";
      const auto values = ints(e.at(key));
      // Mode's equal-frequency shape may round the length up to a multiple of 11.
      const int slack = GetParam() == "ModeFindingEnv" ? 10 : 0;
      ASSERT_GE(static_cast<int>(values.size()), b.min_size);
      ASSERT_LE(static_cast<int>(values.size()), b.max_size + slack);
      for (auto v : values) {
        ASSERT_GE(v, b.min_value);
        ASSERT_LE(v, b.max_value);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Library, Suite,
                         ::testing::Values("ClosestNumberEnv", "LargestRectangleEnv", "ModeFindingEnv",
                                           "EditDistanceEnv"));

TEST(Tiers, ScaledSizes) {
  EXPECT_GE(envs::tier_bounds("ModeFindingEnv", Tier::Hard).min_size, 100);
  EXPECT_GE(envs::tier_bounds("ClosestNumberEnv", Tier::Scaled).min_size, 1000);
  for (const auto& c : envs::generate_hard_unit_tests(reg().at("ClosestNumberEnv"), 5, 5)) {
    EXPECT_GE(c.at("array").size(), 1000u);
  }
  EXPECT_THROW(envs::tier_bounds("NoSuchEnv", Tier::Easy), Error);
}

TEST(Tools, CountsAndDoneLast) {
  EXPECT_EQ(reg().at("ClosestNumberEnv").tools().size(), 3u);
  for (const char* name : {"LargestRectangleEnv", "ModeFindingEnv", "EditDistanceEnv"}) {
    EXPECT_GE(reg().at(name).tools().size(), 4u) << name;
  }
  for (const auto& name : reg().names()) {
    const auto tools = reg().at(name).tools();
    EXPECT_EQ(tools.front().name, "Observe") << name;
    EXPECT_EQ(tools.back().name, "Done") << name;
  }
}

TEST(Tasks, DescriptionsCarryAnExample) {
  for (const auto& name : reg().names()) {
    const auto text = reg().at(name).task_description();
    EXPECT_NE(text.find("Example:"), std::string::npos) << name;
  }
}
