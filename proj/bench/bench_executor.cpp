// Commit-path cost of guarded_step on library environments, per executor.

#include <benchmark/benchmark.h>

#include "codegym/env_library.hpp"
#include "codegym/executor.hpp"

using namespace codegym;

namespace {

const exec::ExecLimits kLimits{std::chrono::milliseconds(2000), std::size_t{256} << 20};

// Replays one oracle episode step by step; reports time per step.
void replay(benchmark::State& state, exec::Executor& executor, const std::string& env_name) {
  const auto& env = envs::builtin_registry().at(env_name);
  const auto config = envs::generate_unit_tests(env, 7, 3).front();
  const auto trajectory = envs::oracle_solve(env, config);
  std::int64_t steps = 0;
  for (auto _ : state) {
    core::EnvInstance instance(env, config, core::Variant::Standard);
    for (const auto& call : trajectory.calls) {
      benchmark::DoNotOptimize(executor.guarded_step(instance, call, kLimits));
    }
    steps += static_cast<std::int64_t>(trajectory.calls.size());
  }
  state.SetItemsProcessed(steps);
  state.counters["calls"] = static_cast<double>(trajectory.calls.size());
}

void BM_InProcess(benchmark::State& state, const std::string& env_name) {
  exec::InProcessExecutor executor;
  replay(state, executor, env_name);
}

void BM_ProcessPool(benchmark::State& state, const std::string& env_name) {
  static exec::ProcessPoolExecutor executor(envs::builtin_registry(), 2);
  replay(state, executor, env_name);
}

void BM_Snapshot(benchmark::State& state, const std::string& env_name) {
  const auto& env = envs::builtin_registry().at(env_name);
  const auto config = envs::generate_hard_unit_tests(env, 7, 3).front();
  const core::EnvInstance instance(env, config, core::Variant::Hard);
  for (auto _ : state) {
    auto snap = exec::snapshot(instance);
    benchmark::DoNotOptimize(exec::restore(env, snap));
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (const auto& name : envs::builtin_registry().names()) {
    benchmark::RegisterBenchmark(("InProcess/" + name).c_str(), BM_InProcess, name);
    benchmark::RegisterBenchmark(("ProcessPool/" + name).c_str(), BM_ProcessPool, name);
    benchmark::RegisterBenchmark(("SnapshotRestore/" + name).c_str(), BM_Snapshot, name);
  }
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
