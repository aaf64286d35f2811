#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "codegym/env_core.hpp"

namespace codegym::exec {

inline constexpr std::chrono::milliseconds kGrace{500};

struct ExecLimits {
  std::chrono::milliseconds wall_time{2000};
  std::size_t memory = std::size_t{256} << 20;

  friend bool operator==(const ExecLimits&, const ExecLimits&) = default;
};

// Throws InvalidArgument when a limit is not strictly positive.
void validate(const ExecLimits& limits);

// Defaults plus per-environment overrides, loadable from JSON:
//   {"wall_time_ms": 2000, "memory_bytes": 268435456,
//    "per_env": {"EditDistanceEnv": {"wall_time_ms": 500}}}
struct LimitsConfig {
  ExecLimits defaults;
  std::map<std::string, ExecLimits, std::less<>> per_env;

  const ExecLimits& for_env(std::string_view env_name) const;

  static LimitsConfig from_json(const Json& value);
  // Throws IoFailure or InvalidArgument.
  static LimitsConfig load(const std::string& path);
};

struct Snapshot {
  std::string env_name;
  std::vector<std::uint8_t> state;  // CBOR of the environment state
  Json config;
  core::Variant variant = core::Variant::Standard;
  int budget = 0;
  int calls_used = 0;
  int turns_used = 0;
  bool finished = false;
  std::optional<int> final_reward;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// Side-effect free. Throws SerializationFailure.
Snapshot snapshot(const core::EnvInstance& instance);
core::EnvInstance restore(const core::Environment& env, const Snapshot& snap);
core::EnvInstance restore(const core::Registry& registry, const Snapshot& snap);

Json to_json(const Snapshot& snap);
Snapshot snapshot_from_json(const Json& value);

enum class RollbackReason { Timeout, MemoryExceeded, Fault };

std::string_view to_string(RollbackReason reason);

struct ExecOutcome {
  // Empty when committed. On rollback `result` carries the error feedback
  // and the budget charge for the failed attempt.
  std::optional<RollbackReason> rolled_back;
  core::StepResult result;
  std::chrono::microseconds elapsed{0};

  bool committed() const { return !rolled_back.has_value(); }
};

class Executor {
 public:
  virtual ~Executor() = default;

  // Throws EpisodeFinished when the instance is already finished.
  virtual ExecOutcome guarded_step(core::EnvInstance& instance, const core::ActionCall& call,
                                   const ExecLimits& limits) = 0;
};

// Steps a copy in the calling thread and commits it on success. Exceptions
// roll back; an over-long call is rolled back after the fact, so the time
// limit is not enforced preemptively.
class InProcessExecutor final : public Executor {
 public:
  ExecOutcome guarded_step(core::EnvInstance& instance, const core::ActionCall& call,
                           const ExecLimits& limits) override;
};

// Runs each call in a pre-forked worker process against the serialized
// snapshot. A worker that overruns its deadline is killed and replaced.
class ProcessPoolExecutor final : public Executor {
 public:
  // The registry must outlive the executor; workers inherit it at fork.
  ProcessPoolExecutor(const core::Registry& registry, std::size_t workers);
  ~ProcessPoolExecutor() override;

  ProcessPoolExecutor(const ProcessPoolExecutor&) = delete;
  ProcessPoolExecutor& operator=(const ProcessPoolExecutor&) = delete;

  ExecOutcome guarded_step(core::EnvInstance& instance, const core::ActionCall& call,
                           const ExecLimits& limits) override;

  std::size_t size() const { return workers_.size(); }
  // Workers replaced after a kill or crash since construction.
  std::uint64_t respawns() const;

 private:
  struct Worker {
    int pid = -1;
    int to_child = -1;
    int from_child = -1;
  };

  Worker spawn();
  void retire(Worker& worker);
  // Workers are handed out in request order; a released worker goes
  // straight to the oldest waiter.
  struct Waiter {
    std::condition_variable ready;
    std::optional<std::size_t> granted;
  };

  std::size_t acquire();
  void release(std::size_t index);

  const core::Registry& registry_;
  std::vector<Worker> workers_;
  std::vector<bool> busy_;
  mutable std::mutex mutex_;
  std::deque<Waiter*> waiters_;
  std::uint64_t respawns_ = 0;
};

// Result of running a function in a forked child under a deadline.
struct ChildResult {
  enum class Status { Ok, Timeout, MemoryExceeded, Fault } status = Status::Fault;
  std::string payload;
  std::chrono::microseconds elapsed{0};
};

// Forks, runs `body` in the child with an address-space cap of `memory`
// bytes above its current size, and collects the string it returns. The
// child is killed at the deadline. std::bad_alloc in the child reports
// MemoryExceeded; any other exception or signal reports Fault.
ChildResult run_in_child(const std::function<std::string()>& body,
                         std::chrono::milliseconds wall_time, std::size_t memory);

}  // namespace codegym::exec
