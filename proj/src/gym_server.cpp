#include "codegym/gym_server.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <iomanip>
#include <random>
#include <sstream>
#include <vector>

#include "codegym/action_protocol.hpp"

namespace codegym::server {

namespace {

constexpr std::size_t kMaxLineBytes = std::size_t{64} << 20;

std::int64_t ticks(Clock::time_point t) { return t.time_since_epoch().count(); }

std::string_view wire_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedEnvString: return kMalformedEnvString;
    case ErrorCode::UnknownEnvironment: return kUnknownEnv;
    case ErrorCode::ConfigSchemaViolation: return kSchemaViolation;
    case ErrorCode::EpisodeFinished: return kEpisodeFinished;
    case ErrorCode::InvalidArgument: return kBadRequest;
    default: return kInternal;
  }
}

Json step_ok(const core::StepResult& result) {
  Json out{{"type", "step_ok"},
           {"observation", result.observation},
           {"finished", result.finished},
           {"calls_used", result.calls_used}};
  if (result.reward) out["reward"] = *result.reward;
  return out;
}

const std::string* string_field(const Json& request, const char* key) {
  auto it = request.find(key);
  if (it == request.end() || !it->is_string()) return nullptr;
  return it->get_ptr<const std::string*>();
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

Json error_response(std::string_view code, const std::string& message) {
  return Json{{"type", "error"}, {"code", code}, {"message", message}};
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == address.size()) {
    throw Error(ErrorCode::InvalidArgument, "address must be host:port, got '" + std::string(address) + "'");
  }
  std::string host(address.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host.empty()) host = "0.0.0.0";
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    const std::string digits(address.substr(colon + 1));
    port = std::stoul(digits, &used);
    if (used != digits.size() || port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad port in '" + std::string(address) + "'");
  }
  return {host, static_cast<std::uint16_t>(port)};
}

// ---------------- SessionManager ----------------

SessionManager::Session::Session(core::EnvInstance inst)
    : instance(std::move(inst)), created_at(Clock::now()), last_active(ticks(created_at)) {}

SessionManager::SessionManager(const core::Registry& registry, exec::Executor& executor,
                               ServerConfig config)
    : registry_(registry), executor_(executor), config_(std::move(config)) {
  std::random_device rd;
  id_prefix_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string SessionManager::next_session_id() {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << id_prefix_ << '-' << std::dec
      << ++id_counter_;
  return out.str();
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

Json SessionManager::handle(const Json& request) {
  Json response;
  if (!request.is_object()) {
    response = error_response(kBadRequest, "request must be a JSON object");
  } else {
    const auto* type = string_field(request, "type");
    try {
      if (type == nullptr) {
        response = error_response(kBadRequest, "request has no string 'type'");
      } else if (*type == "init") {
        response = handle_init(request);
      } else if (*type == "step") {
        response = handle_step(request);
      } else if (*type == "close") {
        response = handle_close(request);
      } else if (*type == "hello") {
        response = handle_hello(request);
      } else {
        response = error_response(kBadRequest, "unknown request type '" + *type + "'");
      }
    } catch (const Error& e) {
      response = error_response(wire_code(e.code()), e.what());
    } catch (const std::exception& e) {
      response = error_response(kInternal, e.what());
    }
    if (auto it = request.find("id"); it != request.end()) response["id"] = *it;
  }
  return response;
}

Json SessionManager::handle_hello(const Json&) const {
  return Json{{"type", "hello_ok"}, {"protocol", kProtocolVersion}, {"envs", registry_.names()}};
}

Json SessionManager::handle_init(const Json& request) {
  const auto* env_string = string_field(request, "env_string");
  if (env_string == nullptr) return error_response(kBadRequest, "init requires a string 'env_string'");
  core::Variant variant = core::Variant::Standard;
  if (request.contains("variant")) {
    const auto* text = string_field(request, "variant");
    if (text == nullptr) return error_response(kBadRequest, "'variant' must be a string");
    try {
      variant = core::parse_variant(*text);
    } catch (const Error& e) {
      return error_response(kBadRequest, e.what());
    }
  }

  auto [name, config] = core::parse_env_string(*env_string);
  const auto& env = registry_.at(name);
  auto prompt = protocol::render_agent_prompt(env, config);
  auto session = std::make_shared<Session>(core::EnvInstance(env, config, variant));
  const int budget = session->instance.budget();

  std::string id;
  {
    std::lock_guard lock(mutex_);
    if (sessions_.size() >= config_.max_sessions) {
      return error_response(kCapacityExceeded, "session limit of " +
                                                   std::to_string(config_.max_sessions) +
                                                   " reached");
    }
    id = next_session_id();
    sessions_.emplace(id, std::move(session));
  }
  return Json{{"type", "init_ok"},
              {"session_id", id},
              {"task", std::move(prompt.user)},
              {"tool_docs", std::move(prompt.system)},
              {"variant", core::to_string(variant)},
              {"budget", budget}};
}

Json SessionManager::handle_step(const Json& request) {
  const auto* id = string_field(request, "session_id");
  if (id == nullptr) return error_response(kBadRequest, "step requires a string 'session_id'");
  const bool has_text = request.contains("agent_text");
  const bool has_action = request.contains("action");
  if (has_text == has_action) {
    return error_response(kBadRequest, "step requires exactly one of 'agent_text' or 'action'");
  }
  const auto* text = has_text ? string_field(request, "agent_text") : nullptr;
  if (has_text && text == nullptr) return error_response(kBadRequest, "'agent_text' must be a string");

  auto session = find(*id);
  if (!session) return error_response(kSessionNotFound, "no session '" + *id + "'");

  std::lock_guard lock(session->mutex);
  session->last_active.store(ticks(Clock::now()));
  auto& instance = session->instance;
  if (instance.finished()) return error_response(kEpisodeFinished, "the episode has already finished");

  core::ActionCall call;
  if (has_text) {
    auto parsed = protocol::extract_function_call(*text);
    if (!parsed.ok()) {
      auto result = instance.record_parse_failure(protocol::format_error_feedback(*parsed.failure));
      session->last_active.store(ticks(Clock::now()));
      return step_ok(result);
    }
    call = std::move(*parsed.call);
  } else {
    try {
      call = core::action_from_json(request.at("action"));
    } catch (const std::exception& e) {
      return error_response(kBadRequest, std::string("bad action: ") + e.what());
    }
  }

  const auto& limits = config_.limits.for_env(instance.environment().name());
  auto outcome = executor_.guarded_step(instance, call, limits);
  session->last_active.store(ticks(Clock::now()));
  return step_ok(outcome.result);
}

Json SessionManager::handle_close(const Json& request) {
  const auto* id = string_field(request, "session_id");
  if (id == nullptr) return error_response(kBadRequest, "close requires a string 'session_id'");
  std::size_t erased = 0;
  {
    std::lock_guard lock(mutex_);
    erased = sessions_.erase(*id);
  }
  Json out{{"type", "closed"}, {"session_id", *id}};
  if (erased == 0) out["warning"] = "no such session; it was already closed or reaped";
  return out;
}

std::size_t SessionManager::reap_sessions(Clock::time_point now, std::chrono::seconds idle_timeout) {
  if (idle_timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "idle_timeout must be positive");
  const auto cutoff = ticks(now - idle_timeout);
  std::vector<std::shared_ptr<Session>> doomed;  // destroyed outside the lock
  std::lock_guard lock(mutex_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (it->second->last_active.load() < cutoff) {
      doomed.push_back(std::move(it->second));
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
  return doomed.size();
}

// ---------------- Server ----------------

Server::Server(SessionManager& sessions) : sessions_(sessions) {
  ::signal(SIGPIPE, SIG_IGN);
  const auto [host, port] = parse_address(sessions_.config().listen);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found); rc != 0) {
    throw Error(ErrorCode::BindFailure, "cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  std::string last_error = "no usable address";
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 1024) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::BindFailure, "cannot listen on " + sessions_.config().listen + ": " + last_error);
  }

  sockaddr_storage bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = bound.ss_family == AF_INET6
              ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
              : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);

  if (::pipe2(wake_pipe_, O_CLOEXEC) != 0) {
    ::close(listen_fd_);
    throw Error(ErrorCode::BindFailure, "pipe failed");
  }
  reaper_ = std::thread([this] { reap_loop(); });
}

Server::~Server() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  for (int fd : wake_pipe_) {
    if (fd >= 0) ::close(fd);
  }
}

void Server::start() {
  runner_ = std::thread([this] { run(); });
}

void Server::run() {
  pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
  while (!stopping_.load()) {
    const int ready = ::poll(fds, 2, 1000);
    if (ready < 0 && errno != EINTR) break;
    join_finished();
    if (ready <= 0 || stopping_.load()) continue;
    if ((fds[0].revents & POLLIN) == 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(conn_mutex_);
    if (stopping_.load()) {
      ::close(fd);
      break;
    }
    auto& conn = connections_.emplace_back();
    conn.fd = fd;
    conn.thread = std::thread([this, &conn] { serve_connection(conn); });
  }
}

void Server::serve_connection(Connection& conn) {
  std::string buffer;
  char chunk[65536];
  bool open = true;
  while (open && !stopping_.load()) {
    const auto n = ::recv(conn.fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n', start)) {
      std::string_view line(buffer.data() + start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      Json request = Json::parse(line, nullptr, false);
      Json response = request.is_discarded()
                          ? error_response(kBadRequest, "request is not valid JSON")
                          : sessions_.handle(request);
      std::string out = response.dump(-1, ' ', false, Json::error_handler_t::replace);
      out.push_back('\n');
      if (!send_all(conn.fd, out)) {
        open = false;
        break;
      }
      if (stopping_.load()) {
        open = false;
        break;
      }
    }
    buffer.erase(0, start);
    if (buffer.size() > kMaxLineBytes) {
      std::string out = error_response(kBadRequest, "request line too long").dump() + "\n";
      send_all(conn.fd, out);
      break;
    }
  }
  ::shutdown(conn.fd, SHUT_RDWR);
  conn.done.store(true);
}

void Server::join_finished() {
  std::lock_guard lock(conn_mutex_);
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (it->done.load()) {
      it->thread.join();
      ::close(it->fd);
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::reap_loop() {
  const auto timeout = sessions_.config().idle_timeout;
  const auto period = std::clamp<std::chrono::milliseconds>(
      std::chrono::duration_cast<std::chrono::milliseconds>(timeout) / 4, std::chrono::milliseconds(50),
      std::chrono::milliseconds(5000));
  std::unique_lock lock(reap_mutex_);
  while (!stopping_.load()) {
    reap_cv_.wait_for(lock, period, [this] { return stopping_.load(); });
    if (stopping_.load()) break;
    if (timeout.count() > 0) sessions_.reap_sessions(Clock::now(), timeout);
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) {
    if (runner_.joinable() && runner_.get_id() != std::this_thread::get_id()) runner_.join();
    return;
  }
  if (wake_pipe_[1] >= 0) {
    const char byte = 1;
    [[maybe_unused]] auto n = ::write(wake_pipe_[1], &byte, 1);
  }
  {
    std::lock_guard lock(reap_mutex_);
  }
  reap_cv_.notify_all();
  if (reaper_.joinable()) reaper_.join();
  if (runner_.joinable() && runner_.get_id() != std::this_thread::get_id()) runner_.join();
  {
    // Connection threads finish the request they are on; no further reads.
    std::lock_guard lock(conn_mutex_);
    for (auto& conn : connections_) ::shutdown(conn.fd, SHUT_RD);
  }
  std::list<Connection> remaining;
  {
    std::lock_guard lock(conn_mutex_);
    remaining.splice(remaining.end(), connections_);
  }
  for (auto& conn : remaining) {
    conn.thread.join();
    ::close(conn.fd);
  }
}

}  // namespace codegym::server
