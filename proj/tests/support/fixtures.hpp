#pragma once

#include <memory>

#include "codegym/env_core.hpp"

namespace codegym::testing {

// Counter environment with misbehaving tools:
//   Observe, Add(x), Spin (never returns), Crash (aborts the process),
//   Hog (allocates until refused), Throw (raises a non-tool exception), Done.
// Config {"target": int}; the reference answer is the target.
enum class OracleMode {
  Normal,      // Observe, Add(target), Done(counter)
  SpinOn13,    // like Normal, but calls Spin first when target == 13
  NeverDone,   // Observe only
};

std::shared_ptr<const core::Environment> make_fault_env(OracleMode mode = OracleMode::Normal);

// Same counter task with no Done tool, so no candidate can ever finish.
std::shared_ptr<const core::Environment> make_no_done_env();

// Exposes a tool literally named "function_name" taking string key1/key2.
std::shared_ptr<const core::Environment> make_markup_env();

// Builtin environments plus every fixture above (names: FaultFixtureEnv,
// SpinFixtureEnv, SilentFixtureEnv, NoDoneFixtureEnv, MarkupFixtureEnv).
const core::Registry& fixture_registry();

}  // namespace codegym::testing
