#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "codegym/env_core.hpp"
#include "codegym/gym_server.hpp"

namespace codegym::rollout {

// One request, one response. Implementations are not thread-safe; use one
// connection per concurrent episode.
class Connection {
 public:
  virtual ~Connection() = default;
  // Throws ConnectionFailure.
  virtual Json request(const Json& message) = 0;
};

class TcpConnection final : public Connection {
 public:
  // Throws ConnectionFailure.
  explicit TcpConnection(const std::string& address);
  ~TcpConnection() override;

  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;

  Json request(const Json& message) override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

// Talks to a SessionManager in the same process, bypassing sockets.
class LocalConnection final : public Connection {
 public:
  explicit LocalConnection(server::SessionManager& sessions) : sessions_(sessions) {}
  Json request(const Json& message) override;

 private:
  server::SessionManager& sessions_;
};

using ConnectionFactory = std::function<std::unique_ptr<Connection>()>;

ConnectionFactory tcp_factory(std::string address);
ConnectionFactory local_factory(server::SessionManager& sessions);

struct Message {
  std::string role;  // system, user, assistant or tool
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Trajectory {
  std::string env_string;
  core::Variant variant = core::Variant::Standard;
  std::vector<Message> messages;
  int tool_calls = 0;
  int reward = 0;
  std::chrono::microseconds wall_time{0};
  bool aborted = false;
  std::string error;                                // set when aborted
  std::vector<std::chrono::microseconds> step_latency;  // not exported

  // Compares everything that is exported.
  bool same_record(const Trajectory& other) const;
};

// What a policy learns at the start of an episode.
struct EpisodeContext {
  std::string env_string;
  std::string env_name;
  core::TaskConfig config;
  core::Variant variant = core::Variant::Standard;
  std::string task;
  std::string tool_docs;
  std::uint64_t seed = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin(const EpisodeContext& context) = 0;
  // Next assistant message given the latest observation ("" before the
  // first step).
  virtual std::string act(const std::string& observation) = 0;
};

struct PolicySpec {
  enum class Kind { Oracle, Random, NoisyOracle, Scripted } kind = Kind::Oracle;
  double p = 0.0;       // noisy-oracle corruption probability
  std::string script;   // scripted: path to a JSON list of messages or a replay buffer

  std::string to_string() const;
};

// "oracle", "random", "noisy-oracle:p=0.5", "scripted:path". A bare
// "noisy-oracle" means p=0.5. Throws InvalidArgument.
PolicySpec parse_policy_spec(std::string_view text);

// The registry supplies oracles for the oracle-derived policies.
std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const core::Registry& registry);

// init, then policy/step until the server reports the episode finished,
// then close. Failures mark the trajectory aborted instead of throwing.
Trajectory run_episode(Connection& connection, const std::string& env_string, core::Variant variant,
                       Policy& policy, std::uint64_t seed);

struct BatchStats {
  std::size_t episodes = 0;
  std::size_t aborted = 0;
  double mean_reward = 0;
  double mean_tool_calls = 0;
  double p50_latency_ms = 0;
  double p99_latency_ms = 0;
};

struct BatchResult {
  // Instance-major: samples of line 0, then samples of line 1, ...
  std::vector<Trajectory> trajectories;
  BatchStats stats;
};

struct BatchOptions {
  std::size_t parallelism = 1;
  int samples = 1;
  std::uint64_t seed = 0;
  core::Variant variant = core::Variant::Standard;
};

// Seeds depend on (seed, env_string, sample) only, so results do not
// depend on parallelism.
BatchResult run_batch(const ConnectionFactory& connect, const std::vector<std::string>& manifest,
                      const PolicySpec& policy, const core::Registry& registry,
                      const BatchOptions& options);

std::uint64_t episode_seed(std::uint64_t seed, std::string_view env_string, int sample);

// Non-aborted trajectories only. Returns the number of lines written.
// Throws IoFailure.
std::size_t export_replay_buffer(const std::vector<Trajectory>& trajectories, const std::string& path);
// Throws IoFailure or ManifestParseError.
std::vector<Trajectory> import_replay_buffer(const std::string& path);

Json to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const Json& value);

struct TrajectoryStats {
  std::size_t count = 0;
  double mean_tool_calls = 0;
  double median_tool_calls = 0;
  double mean_reward = 0;
  std::map<std::string, double> reward_by_env;
  // Mean of (tool_calls - oracle calls) over trajectories with a known
  // oracle count.
  std::optional<double> oracle_gap;
};

// Throws EmptyInput. `oracle_calls` maps env-strings to oracle call counts.
TrajectoryStats trajectory_stats(const std::vector<Trajectory>& trajectories,
                                 const std::map<std::string, int>& oracle_calls = {});

Json to_json(const TrajectoryStats& stats);
Json to_json(const BatchStats& stats);

// Env-strings, one per line; blank lines and lines starting with '#' are
// skipped. Each line must parse as an env-string. Throws IoFailure or
// ManifestParseError.
std::vector<std::string> read_manifest(const std::string& path);

}  // namespace codegym::rollout
