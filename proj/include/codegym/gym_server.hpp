#pragma once

#include <atomic>
#include <condition_variable>
#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "codegym/env_core.hpp"
#include "codegym/executor.hpp"

namespace codegym::server {

// Wire error codes.
inline constexpr std::string_view kMalformedEnvString = "MALFORMED_ENV_STRING";
inline constexpr std::string_view kUnknownEnv = "UNKNOWN_ENV";
inline constexpr std::string_view kSchemaViolation = "SCHEMA_VIOLATION";
inline constexpr std::string_view kCapacityExceeded = "CAPACITY_EXCEEDED";
inline constexpr std::string_view kSessionNotFound = "SESSION_NOT_FOUND";
inline constexpr std::string_view kEpisodeFinished = "EPISODE_FINISHED";
inline constexpr std::string_view kBadRequest = "BAD_REQUEST";
inline constexpr std::string_view kInternal = "INTERNAL";

inline constexpr int kProtocolVersion = 1;

using Clock = std::chrono::steady_clock;

struct ServerConfig {
  std::string listen = "127.0.0.1:7777";
  std::size_t max_sessions = 1024;
  std::chrono::seconds idle_timeout{600};
  exec::LimitsConfig limits;
};

// Session table and request handlers. Transport-agnostic: the TCP server
// and in-process clients both feed it parsed JSON requests.
class SessionManager {
 public:
  SessionManager(const core::Registry& registry, exec::Executor& executor, ServerConfig config);

  // Dispatches on "type". Always returns exactly one response object; a
  // request "id" field is echoed back.
  Json handle(const Json& request);

  Json handle_init(const Json& request);
  Json handle_step(const Json& request);
  Json handle_close(const Json& request);
  Json handle_hello(const Json& request) const;

  // Closes sessions idle for longer than `idle_timeout` as of `now`.
  std::size_t reap_sessions(Clock::time_point now, std::chrono::seconds idle_timeout);

  std::size_t size() const;
  const ServerConfig& config() const { return config_; }
  const core::Registry& registry() const { return registry_; }

 private:
  struct Session {
    std::mutex mutex;
    core::EnvInstance instance;
    Clock::time_point created_at;
    std::atomic<std::int64_t> last_active;  // Clock ticks

    explicit Session(core::EnvInstance inst);
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  std::string next_session_id();

  const core::Registry& registry_;
  exec::Executor& executor_;
  ServerConfig config_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t id_prefix_;
  std::uint64_t id_counter_ = 0;
};

Json error_response(std::string_view code, const std::string& message);

// Newline-delimited JSON over TCP, one thread per connection. Requests on a
// connection are answered in arrival order.
class Server {
 public:
  // Binds immediately. Throws BindFailure.
  explicit Server(SessionManager& sessions);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }

  // Accepts connections until stop(). Blocks.
  void run();
  // Starts run() on a background thread.
  void start();
  // Stops accepting, lets every connection finish the request it is
  // processing, then closes all connections. Safe from any thread.
  void stop();

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void serve_connection(Connection& conn);
  void reap_loop();
  void join_finished();

  SessionManager& sessions_;
  int listen_fd_ = -1;
  int wake_pipe_[2] = {-1, -1};
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex conn_mutex_;
  std::list<Connection> connections_;
  std::thread runner_;
  std::thread reaper_;
  std::mutex reap_mutex_;
  std::condition_variable reap_cv_;
};

// "host:port" -> (host, port). Throws InvalidArgument.
std::pair<std::string, std::uint16_t> parse_address(std::string_view address);

}  // namespace codegym::server
