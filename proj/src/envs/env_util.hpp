#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "codegym/env_core.hpp"
#include "codegym/rng.hpp"

namespace codegym::envs::detail {

// Last integer appearing in an observation ("element at index 2 is 5" -> 5).
// Throws OracleFailed when there is none.
std::int64_t trailing_int(std::string_view observation);

// JSON value following `marker` in an observation.
Json json_after(std::string_view observation, std::string_view marker);

std::string render_list(const std::vector<std::int64_t>& values);

std::vector<std::int64_t> int_list(const Json& value);

std::int64_t int_param(const Json& params, const char* key);

core::StepResult expect_live(core::StepResult result);

std::vector<std::int64_t> random_ints(Rng& rng, int size, std::int64_t lo, std::int64_t hi);

}  // namespace codegym::envs::detail
