#include "codegym/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>

#include "codegym/feedback.hpp"

namespace codegym::exec {

namespace {

using Clock = std::chrono::steady_clock;

std::chrono::microseconds since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
}

ExecLimits limits_from_json(const Json& value, ExecLimits base) {
  if (value.contains("wall_time_ms")) {
    base.wall_time = std::chrono::milliseconds(value.at("wall_time_ms").get<std::int64_t>());
  }
  if (value.contains("memory_bytes")) base.memory = value.at("memory_bytes").get<std::size_t>();
  validate(base);
  return base;
}

// ---- framing: 4-byte little-endian length, then the payload ----

bool write_all(int fd, const char* data, std::size_t size) {
  while (size > 0) {
    const auto n = ::write(fd, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

bool write_frame(int fd, std::string_view payload) {
  const auto size = static_cast<std::uint32_t>(payload.size());
  char header[4];
  for (int i = 0; i < 4; ++i) header[i] = static_cast<char>((size >> (8 * i)) & 0xff);
  return write_all(fd, header, 4) && write_all(fd, payload.data(), payload.size());
}

enum class ReadStatus { Ok, Timeout, Eof };

// Reads one frame; a negative timeout blocks indefinitely.
ReadStatus read_frame(int fd, std::string& out, std::optional<Clock::time_point> deadline) {
  std::string buffer;
  std::size_t want = 4;
  bool have_header = false;
  char chunk[65536];
  while (true) {
    if (buffer.size() >= want) {
      if (!have_header) {
        std::uint32_t size = 0;
        for (int i = 0; i < 4; ++i) {
          size |= static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[static_cast<std::size_t>(i)])) << (8 * i);
        }
        buffer.erase(0, 4);
        want = size;
        have_header = true;
        continue;
      }
      out = buffer.substr(0, want);
      return ReadStatus::Ok;
    }
    int timeout_ms = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
      if (left.count() <= 0) return ReadStatus::Timeout;
      timeout_ms = static_cast<int>(left.count()) + 1;
    }
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, timeout_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      return ReadStatus::Eof;
    }
    if (ready == 0) continue;  // re-check the deadline
    const auto n = ::read(fd, chunk, std::min(sizeof(chunk), (have_header ? want : 4) - buffer.size() + 4096));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return ReadStatus::Eof;
    }
    if (n == 0) return ReadStatus::Eof;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

// Pass an open /proc/self/statm descriptor to avoid reopening it.
std::size_t current_vm_bytes(int statm_fd = -1) {
  static const auto page = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
  const int fd = statm_fd >= 0 ? statm_fd : ::open("/proc/self/statm", O_RDONLY | O_CLOEXEC);
  if (fd < 0) return 0;
  char buf[64];
  const auto n = ::pread(fd, buf, sizeof buf - 1, 0);
  if (statm_fd < 0) ::close(fd);
  if (n <= 0) return 0;
  buf[n] = '\0';
  return static_cast<std::size_t>(std::strtoull(buf, nullptr, 10)) * page;
}

void set_address_space_limit(std::size_t bytes) {
  rlimit limit{};
  ::getrlimit(RLIMIT_AS, &limit);
  limit.rlim_cur = bytes == 0 ? limit.rlim_max : std::min<rlim_t>(bytes, limit.rlim_max);
  ::setrlimit(RLIMIT_AS, &limit);
}

// Common setup for any child: die with the parent, no core files, and no
// inherited descriptors besides the ones it talks on.
void prepare_child(int keep_a, int keep_b) {
  ::prctl(PR_SET_PDEATHSIG, SIGKILL);
  rlimit no_core{0, 0};
  ::setrlimit(RLIMIT_CORE, &no_core);
  const int lo = std::min(keep_a, keep_b);
  const int hi = std::max(keep_a, keep_b);
  auto close_range = [](unsigned first, unsigned last) {
    if (first <= last) ::syscall(SYS_close_range, first, last, 0);
  };
  close_range(3, static_cast<unsigned>(lo) - 1);
  close_range(static_cast<unsigned>(lo) + 1, static_cast<unsigned>(hi) - 1);
  close_range(static_cast<unsigned>(hi) + 1, ~0U);
}

void kill_and_reap(int pid) {
  if (pid <= 0) return;
  ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
}

std::string feedback_for(RollbackReason reason) {
  switch (reason) {
    case RollbackReason::Timeout:
      return protocol::format_error_feedback(protocol::DispatchError::Timeout);
    case RollbackReason::MemoryExceeded:
      return protocol::format_error_feedback(protocol::DispatchError::MemoryExceeded);
    case RollbackReason::Fault:
      return protocol::format_error_feedback(protocol::DispatchError::Fault);
  }
  return {};
}

ExecOutcome rolled_back(core::EnvInstance& instance, RollbackReason reason,
                        Clock::time_point start) {
  ExecOutcome out;
  out.rolled_back = reason;
  out.result = instance.charge_failed_dispatch(feedback_for(reason));
  out.elapsed = since(start);
  return out;
}

void require_live(const core::EnvInstance& instance) {
  if (instance.finished()) throw Error(ErrorCode::EpisodeFinished, "episode already finished");
}

Json result_to_json(const core::StepResult& r) {
  Json j{{"observation", r.observation}, {"finished", r.finished}, {"calls_used", r.calls_used}};
  if (r.reward) j["reward"] = *r.reward;
  return j;
}

core::StepResult result_from_json(const Json& j) {
  core::StepResult r;
  r.observation = j.at("observation").get<std::string>();
  r.finished = j.at("finished").get<bool>();
  r.calls_used = j.at("calls_used").get<int>();
  if (j.contains("reward")) r.reward = j.at("reward").get<int>();
  return r;
}

// Worker side of ProcessPoolExecutor. Request: {"snapshot", "call",
// "memory"}. Response: {"status": "ok"|"memory"|"fault", "result",
// "snapshot"}.
[[noreturn]] void worker_main(const core::Registry& registry, int in_fd, int out_fd) {
  const int statm = ::open("/proc/self/statm", O_RDONLY | O_CLOEXEC);
  std::string frame;
  while (read_frame(in_fd, frame, std::nullopt) == ReadStatus::Ok) {
    Json response;
    try {
      const Json request = Json::from_cbor(frame);
      const auto snap = snapshot_from_json(request.at("snapshot"));
      const auto call = core::action_from_json(request.at("call"));
      const auto memory = request.at("memory").get<std::size_t>();
      auto instance = restore(registry, snap);
      set_address_space_limit(current_vm_bytes(statm) + memory);
      try {
        auto result = instance.step(call);
        set_address_space_limit(0);
        // Only what a step can change; the parent keeps env, config and variant.
        response = Json{{"status", "ok"},
                        {"result", result_to_json(result)},
                        {"state", Json::binary(Json::to_cbor(instance.state_json()))},
                        {"budget", instance.budget()},
                        {"calls_used", instance.calls_used()},
                        {"turns_used", instance.turns_used()},
                        {"finished", instance.finished()}};
        if (instance.final_reward()) response["reward"] = *instance.final_reward();
      } catch (const std::bad_alloc&) {
        set_address_space_limit(0);
        response = Json{{"status", "memory"}};
      }
    } catch (const std::exception& e) {
      set_address_space_limit(0);
      response = Json{{"status", "fault"}, {"message", e.what()}};
    }
    const auto bytes = Json::to_cbor(response);
    if (!write_frame(out_fd, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))) {
      break;
    }
  }
  ::_exit(0);
}

}  // namespace

void validate(const ExecLimits& limits) {
  if (limits.wall_time.count() <= 0 || limits.memory == 0) {
    throw Error(ErrorCode::InvalidArgument, "execution limits must be strictly positive");
  }
}

const ExecLimits& LimitsConfig::for_env(std::string_view env_name) const {
  auto it = per_env.find(env_name);
  return it == per_env.end() ? defaults : it->second;
}

LimitsConfig LimitsConfig::from_json(const Json& value) {
  LimitsConfig out;
  try {
    out.defaults = limits_from_json(value, ExecLimits{});
    if (value.contains("per_env")) {
      for (const auto& [name, overrides] : value.at("per_env").items()) {
        out.per_env[name] = limits_from_json(overrides, out.defaults);
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad limits config: ") + e.what());
  }
  return out;
}

LimitsConfig LimitsConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open limits file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return from_json(parse_lenient(text));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "limits file " + path + ": " + e.what());
  }
}

Snapshot snapshot(const core::EnvInstance& instance) {
  Snapshot snap;
  snap.env_name = std::string(instance.environment().name());
  try {
    snap.state = Json::to_cbor(instance.state_json());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::SerializationFailure,
                snap.env_name + " state is not serializable: " + e.what());
  }
  snap.config = instance.config().entries();
  snap.variant = instance.variant();
  snap.budget = instance.budget();
  snap.calls_used = instance.calls_used();
  snap.turns_used = instance.turns_used();
  snap.finished = instance.finished();
  snap.final_reward = instance.final_reward();
  return snap;
}

core::EnvInstance restore(const core::Environment& env, const Snapshot& snap) {
  Json state;
  try {
    state = Json::from_cbor(snap.state);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SerializationFailure, std::string("corrupt snapshot: ") + e.what());
  }
  return core::EnvInstance::restore(env, core::TaskConfig(snap.config), snap.variant, state,
                                    snap.budget, snap.calls_used, snap.turns_used, snap.finished,
                                    snap.final_reward);
}

core::EnvInstance restore(const core::Registry& registry, const Snapshot& snap) {
  return restore(registry.at(snap.env_name), snap);
}

Json to_json(const Snapshot& snap) {
  Json j{{"env", snap.env_name},
         {"state", Json::binary(snap.state)},
         {"config", snap.config},
         {"variant", core::to_string(snap.variant)},
         {"budget", snap.budget},
         {"calls_used", snap.calls_used},
         {"turns_used", snap.turns_used},
         {"finished", snap.finished}};
  if (snap.final_reward) j["reward"] = *snap.final_reward;
  return j;
}

Snapshot snapshot_from_json(const Json& j) {
  Snapshot snap;
  try {
    snap.env_name = j.at("env").get<std::string>();
    // Binary in CBOR; {"bytes": [...], "subtype": ...} after a trip through text JSON.
    const auto& state = j.at("state");
    snap.state = state.is_binary() ? std::vector<std::uint8_t>(state.get_binary())
                                   : state.at("bytes").get<std::vector<std::uint8_t>>();
    snap.config = j.at("config");
    snap.variant = core::parse_variant(j.at("variant").get<std::string>());
    snap.budget = j.at("budget").get<int>();
    snap.calls_used = j.at("calls_used").get<int>();
    snap.turns_used = j.at("turns_used").get<int>();
    snap.finished = j.at("finished").get<bool>();
    if (j.contains("reward")) snap.final_reward = j.at("reward").get<int>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SerializationFailure, std::string("bad snapshot: ") + e.what());
  }
  return snap;
}

std::string_view to_string(RollbackReason reason) {
  switch (reason) {
    case RollbackReason::Timeout: return "Timeout";
    case RollbackReason::MemoryExceeded: return "MemoryExceeded";
    case RollbackReason::Fault: return "Fault";
  }
  return "?";
}

ExecOutcome InProcessExecutor::guarded_step(core::EnvInstance& instance,
                                            const core::ActionCall& call,
                                            const ExecLimits& limits) {
  require_live(instance);
  const auto start = Clock::now();
  try {
    core::EnvInstance trial(instance);
    auto result = trial.step(call);
    if (since(start) > limits.wall_time) return rolled_back(instance, RollbackReason::Timeout, start);
    instance = std::move(trial);
    return ExecOutcome{std::nullopt, std::move(result), since(start)};
  } catch (const std::bad_alloc&) {
    return rolled_back(instance, RollbackReason::MemoryExceeded, start);
  } catch (const std::exception&) {
    return rolled_back(instance, RollbackReason::Fault, start);
  }
}

ProcessPoolExecutor::ProcessPoolExecutor(const core::Registry& registry, std::size_t workers)
    : registry_(registry) {
  ::signal(SIGPIPE, SIG_IGN);
  workers = std::max<std::size_t>(workers, 1);
  workers_.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) workers_.push_back(spawn());
  busy_.assign(workers, false);
}

ProcessPoolExecutor::~ProcessPoolExecutor() {
  std::lock_guard lock(mutex_);
  for (auto& worker : workers_) retire(worker);
}

std::uint64_t ProcessPoolExecutor::respawns() const {
  std::lock_guard lock(mutex_);
  return respawns_;
}

ProcessPoolExecutor::Worker ProcessPoolExecutor::spawn() {
  int down[2];
  int up[2];
  if (::pipe2(down, O_CLOEXEC) != 0) throw Error(ErrorCode::IoFailure, "pipe failed");
  if (::pipe2(up, O_CLOEXEC) != 0) {
    ::close(down[0]);
    ::close(down[1]);
    throw Error(ErrorCode::IoFailure, "pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {down[0], down[1], up[0], up[1]}) ::close(fd);
    throw Error(ErrorCode::IoFailure, std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    prepare_child(down[0], up[1]);
    worker_main(registry_, down[0], up[1]);
  }
  ::close(down[0]);
  ::close(up[1]);
  return Worker{pid, down[1], up[0]};
}

void ProcessPoolExecutor::retire(Worker& worker) {
  if (worker.to_child >= 0) ::close(worker.to_child);
  if (worker.from_child >= 0) ::close(worker.from_child);
  kill_and_reap(worker.pid);
  worker = Worker{};
}

std::size_t ProcessPoolExecutor::acquire() {
  std::unique_lock lock(mutex_);
  std::size_t index = workers_.size();
  if (waiters_.empty()) {
    const auto free = std::find(busy_.begin(), busy_.end(), false);
    if (free != busy_.end()) {
      index = static_cast<std::size_t>(free - busy_.begin());
      busy_[index] = true;
    }
  }
  if (index == workers_.size()) {
    Waiter self;
    waiters_.push_back(&self);
    self.ready.wait(lock, [&] { return self.granted.has_value(); });
    index = *self.granted;
  }
  if (workers_[index].pid < 0) {
    try {
      workers_[index] = spawn();
      ++respawns_;
    } catch (...) {
      lock.unlock();
      release(index);
      throw;
    }
  }
  return index;
}

void ProcessPoolExecutor::release(std::size_t index) {
  std::lock_guard lock(mutex_);
  if (waiters_.empty()) {
    busy_[index] = false;
    return;
  }
  Waiter* next = waiters_.front();
  waiters_.pop_front();
  next->granted = index;
  next->ready.notify_one();
}

ExecOutcome ProcessPoolExecutor::guarded_step(core::EnvInstance& instance,
                                              const core::ActionCall& call,
                                              const ExecLimits& limits) {
  require_live(instance);
  validate(limits);
  const Json request{{"snapshot", to_json(snapshot(instance))},
                     {"call", core::to_json(call)},
                     {"memory", limits.memory}};
  const auto bytes = Json::to_cbor(request);

  const auto index = acquire();
  // The deadline starts once a worker is ours, so queueing for a free worker
  // does not eat into the call's time limit.
  const auto start = Clock::now();
  Worker& worker = workers_[index];
  std::string frame;
  ReadStatus status = ReadStatus::Eof;
  if (write_frame(worker.to_child,
                  std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))) {
    status = read_frame(worker.from_child, frame, start + limits.wall_time);
  }
  if (status != ReadStatus::Ok) {
    retire(worker);
    release(index);
    return rolled_back(instance,
                       status == ReadStatus::Timeout ? RollbackReason::Timeout : RollbackReason::Fault,
                       start);
  }
  release(index);

  Json response;
  try {
    response = Json::from_cbor(frame);
  } catch (const Json::exception&) {
    return rolled_back(instance, RollbackReason::Fault, start);
  }
  const auto verdict = response.value("status", "fault");
  if (verdict == "memory") return rolled_back(instance, RollbackReason::MemoryExceeded, start);
  if (verdict != "ok") return rolled_back(instance, RollbackReason::Fault, start);

  try {
    std::optional<int> reward;
    if (response.contains("reward")) reward = response.at("reward").get<int>();
    instance.load(Json::from_cbor(response.at("state").get_binary()), response.at("budget").get<int>(),
                  response.at("calls_used").get<int>(), response.at("turns_used").get<int>(),
                  response.at("finished").get<bool>(), reward);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SerializationFailure, std::string("corrupt worker response: ") + e.what());
  }
  return ExecOutcome{std::nullopt, result_from_json(response.at("result")), since(start)};
}

ChildResult run_in_child(const std::function<std::string()>& body,
                         std::chrono::milliseconds wall_time, std::size_t memory) {
  ::signal(SIGPIPE, SIG_IGN);
  int up[2];
  if (::pipe2(up, O_CLOEXEC) != 0) throw Error(ErrorCode::IoFailure, "pipe failed");
  const auto start = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(up[0]);
    ::close(up[1]);
    throw Error(ErrorCode::IoFailure, std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::close(up[0]);
    prepare_child(up[1], up[1]);
    std::string message;
    char tag = 'F';
    try {
      set_address_space_limit(current_vm_bytes() + memory);
      message = body();
      tag = 'O';
    } catch (const std::bad_alloc&) {
      tag = 'M';
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    set_address_space_limit(0);
    message.insert(message.begin(), tag);
    write_frame(up[1], message);
    ::_exit(0);
  }
  ::close(up[1]);

  ChildResult out;
  std::string frame;
  const auto status = read_frame(up[0], frame, start + wall_time);
  ::close(up[0]);
  if (status == ReadStatus::Timeout) {
    kill_and_reap(pid);
    out.status = ChildResult::Status::Timeout;
  } else {
    int wstatus = 0;
    while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
    }
    if (status == ReadStatus::Ok && !frame.empty()) {
      switch (frame.front()) {
        case 'O': out.status = ChildResult::Status::Ok; break;
        case 'M': out.status = ChildResult::Status::MemoryExceeded; break;
        default: out.status = ChildResult::Status::Fault; break;
      }
      out.payload = frame.substr(1);
    }
  }
  out.elapsed = since(start);
  return out;
}

}  // namespace codegym::exec
