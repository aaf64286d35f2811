#include "codegym/rollout.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "codegym/action_protocol.hpp"
#include "codegym/env_library.hpp"
#include "codegym/rng.hpp"

namespace codegym::rollout {

namespace {

using Clock = std::chrono::steady_clock;
using OrderedJson = nlohmann::ordered_json;

std::chrono::microseconds since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// ---------------- policies ----------------

struct ToolShape {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<std::string> param_types;
};

// Recovers tool signatures from the rendered docs, the same text a model
// would read.
std::vector<ToolShape> parse_tool_shapes(const std::string& docs) {
  static const std::regex def_line(R"(def (\w+)\(([^)]*)\):)");
  std::vector<ToolShape> shapes;
  for (std::sregex_iterator it(docs.begin(), docs.end(), def_line), end; it != end; ++it) {
    ToolShape shape;
    shape.name = (*it)[1];
    std::stringstream params((*it)[2]);
    std::string item;
    while (std::getline(params, item, ',')) {
      const auto colon = item.find(':');
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(' ');
        const auto b = s.find_last_not_of(' ');
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      if (colon == std::string::npos) {
        shape.param_names.push_back(trim(item));
        shape.param_types.push_back("Any");
      } else {
        shape.param_names.push_back(trim(item.substr(0, colon)));
        shape.param_types.push_back(trim(item.substr(colon + 1)));
      }
    }
    shapes.push_back(std::move(shape));
  }
  return shapes;
}

Json random_value(Rng& rng, const std::string& type) {
  if (type == "list[int]" || type == "list") {
    Json list = Json::array();
    const auto n = rng.uniform(0, 5);
    for (std::int64_t i = 0; i < n; ++i) list.push_back(rng.uniform(0, 10));
    return list;
  }
  if (type == "str") {
    static const char* const choices[] = {"s1", "s2", "a", ""};
    return choices[rng.uniform(0, 3)];
  }
  if (type == "float") return rng.unit() * 20.0;
  return rng.uniform(-1, 20);
}

core::ActionCall random_call(Rng& rng, const std::vector<ToolShape>& tools) {
  const auto& tool = tools[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(tools.size()) - 1))];
  core::ActionCall call{tool.name, Json::object()};
  for (std::size_t i = 0; i < tool.param_names.size(); ++i) {
    call.parameters[tool.param_names[i]] = random_value(rng, tool.param_types[i]);
  }
  return call;
}

class OraclePolicy final : public Policy {
 public:
  OraclePolicy(const core::Registry& registry, double noise)
      : registry_(registry), noise_(noise), rng_(0) {}

  void begin(const EpisodeContext& ctx) override {
    rng_ = Rng(ctx.seed);
    const auto trajectory = envs::oracle_solve(registry_, ctx.env_name, ctx.config, ctx.variant);
    pending_.assign(trajectory.calls.begin(), trajectory.calls.end());
    tools_ = parse_tool_shapes(ctx.tool_docs);
  }

  std::string act(const std::string&) override {
    if (!tools_.empty() && (pending_.empty() || (noise_ > 0 && rng_.bernoulli(noise_)))) {
      return protocol::wrap_call(random_call(rng_, tools_));
    }
    if (pending_.empty()) return "I have nothing left to call.";
    auto call = std::move(pending_.front());
    pending_.pop_front();
    return protocol::wrap_call(call);
  }

 private:
  const core::Registry& registry_;
  double noise_;
  Rng rng_;
  std::deque<core::ActionCall> pending_;
  std::vector<ToolShape> tools_;
};

// Uniform over the non-Done tools with random arguments, plus the odd
// message without markup. Never submits, so episodes end by exhaustion.
class RandomPolicy final : public Policy {
 public:
  void begin(const EpisodeContext& ctx) override {
    rng_ = Rng(ctx.seed);
    tools_ = parse_tool_shapes(ctx.tool_docs);
    std::erase_if(tools_, [](const ToolShape& t) { return t.name == "Done"; });
  }

  std::string act(const std::string&) override {
    if (tools_.empty() || rng_.bernoulli(0.05)) return "Let me think about this.";
    return protocol::wrap_call(random_call(rng_, tools_));
  }

 private:
  Rng rng_{0};
  std::vector<ToolShape> tools_;
};

class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> script) : script_(std::move(script)) {}

  void begin(const EpisodeContext&) override { next_ = 0; }

  std::string act(const std::string&) override {
    return next_ < script_.size() ? script_[next_++] : std::string();
  }

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

std::vector<std::string> load_script(const std::string& path) {
  const auto text = read_file(path);
  Json whole = Json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array() && std::all_of(whole.begin(), whole.end(), [](const Json& v) { return v.is_string(); })) {
      return whole.get<std::vector<std::string>>();
    }
    if (whole.is_object()) {
      std::vector<std::string> out;
      for (const auto& m : trajectory_from_json(whole).messages) {
        if (m.role == "assistant") out.push_back(m.content);
      }
      return out;
    }
  }
  // Replay buffer: take the first record.
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded()) break;
    std::vector<std::string> out;
    for (const auto& m : trajectory_from_json(record).messages) {
      if (m.role == "assistant") out.push_back(m.content);
    }
    return out;
  }
  throw Error(ErrorCode::InvalidArgument,
              "script " + path + " is neither a JSON list of messages nor a replay buffer");
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

double percentile(std::vector<double>& sorted_values, double q) {
  if (sorted_values.empty()) return 0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted_values.size())));
  return sorted_values[std::clamp<std::size_t>(rank, 1, sorted_values.size()) - 1];
}

}  // namespace

// ---------------- connections ----------------

TcpConnection::TcpConnection(const std::string& address) {
  const auto [host, port] = server::parse_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found); rc != 0) {
    throw Error(ErrorCode::ConnectionFailure, "cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no usable address";
  for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw Error(ErrorCode::ConnectionFailure, "cannot connect to " + address + ": " + last_error);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpConnection::~TcpConnection() {
  if (fd_ >= 0) ::close(fd_);
}

Json TcpConnection::request(const Json& message) {
  if (fd_ < 0) throw Error(ErrorCode::ConnectionFailure, "connection is closed");
  std::string line = message.dump(-1, ' ', false, Json::error_handler_t::replace);
  line.push_back('\n');
  std::string_view rest(line);
  while (!rest.empty()) {
    const auto n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::ConnectionFailure, std::string("send failed: ") + std::strerror(errno));
    rest.remove_prefix(static_cast<std::size_t>(n));
  }
  char chunk[65536];
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      Json response = Json::parse(std::string_view(buffer_).substr(0, nl), nullptr, false);
      buffer_.erase(0, nl + 1);
      if (response.is_discarded()) throw Error(ErrorCode::ConnectionFailure, "server sent invalid JSON");
      return response;
    }
    const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error(ErrorCode::ConnectionFailure, "server closed the connection");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Json LocalConnection::request(const Json& message) { return sessions_.handle(message); }

ConnectionFactory tcp_factory(std::string address) {
  return [address = std::move(address)]() -> std::unique_ptr<Connection> {
    return std::make_unique<TcpConnection>(address);
  };
}

ConnectionFactory local_factory(server::SessionManager& sessions) {
  return [&sessions]() -> std::unique_ptr<Connection> { return std::make_unique<LocalConnection>(sessions); };
}

// ---------------- policies: public ----------------

std::string PolicySpec::to_string() const {
  switch (kind) {
    case Kind::Oracle: return "oracle";
    case Kind::Random: return "random";
    case Kind::NoisyOracle: {
      std::ostringstream out;
      out << "noisy-oracle:p=" << p;
      return out.str();
    }
    case Kind::Scripted: return "scripted:" + script;
  }
  return "?";
}

PolicySpec parse_policy_spec(std::string_view text) {
  PolicySpec spec;
  if (text == "oracle") return spec;
  if (text == "random") {
    spec.kind = PolicySpec::Kind::Random;
    return spec;
  }
  if (text.starts_with("noisy-oracle")) {
    spec.kind = PolicySpec::Kind::NoisyOracle;
    spec.p = 0.5;
    auto rest = text.substr(std::string_view("noisy-oracle").size());
    if (!rest.empty()) {
      if (!rest.starts_with(":p=")) throw Error(ErrorCode::InvalidArgument, "expected noisy-oracle:p=<prob>");
      const std::string number(rest.substr(3));
      std::size_t used = 0;
      try {
        spec.p = std::stod(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != number.size() || !(spec.p >= 0.0 && spec.p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "noisy-oracle probability must be in [0, 1]");
      }
    }
    return spec;
  }
  if (text.starts_with("scripted:") && text.size() > 9) {
    spec.kind = PolicySpec::Kind::Scripted;
    spec.script = std::string(text.substr(9));
    if (spec.script.starts_with("file=")) spec.script.erase(0, 5);
    return spec;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown policy '" + std::string(text) +
                  "' (expected oracle, random, noisy-oracle:p=<prob> or scripted:<file>)");
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const core::Registry& registry) {
  switch (spec.kind) {
    case PolicySpec::Kind::Oracle: return std::make_unique<OraclePolicy>(registry, 0.0);
    case PolicySpec::Kind::NoisyOracle: return std::make_unique<OraclePolicy>(registry, spec.p);
    case PolicySpec::Kind::Random: return std::make_unique<RandomPolicy>();
    case PolicySpec::Kind::Scripted: return std::make_unique<ScriptedPolicy>(load_script(spec.script));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown policy kind");
}

// ---------------- episodes ----------------

bool Trajectory::same_record(const Trajectory& other) const {
  return env_string == other.env_string && variant == other.variant && messages == other.messages &&
         tool_calls == other.tool_calls && reward == other.reward && aborted == other.aborted;
}

Trajectory run_episode(Connection& connection, const std::string& env_string, core::Variant variant,
                       Policy& policy, std::uint64_t seed) {
  const auto start = Clock::now();
  Trajectory t;
  t.env_string = env_string;
  t.variant = variant;
  std::optional<std::string> session_id;

  auto abort_with = [&](std::string why) {
    t.aborted = true;
    t.error = std::move(why);
  };

  try {
    auto [name, config] = core::parse_env_string(env_string);
    const Json init = connection.request(
        Json{{"type", "init"}, {"env_string", env_string}, {"variant", core::to_string(variant)}});
    if (init.value("type", "") != "init_ok") {
      abort_with(init.value("code", "PROTOCOL") + ": " + init.value("message", init.dump()));
    } else {
      session_id = init.at("session_id").get<std::string>();
      EpisodeContext ctx{env_string,
                         name,
                         config,
                         variant,
                         init.at("task").get<std::string>(),
                         init.at("tool_docs").get<std::string>(),
                         seed};
      t.messages.push_back({"system", ctx.tool_docs});
      t.messages.push_back({"user", ctx.task});
      policy.begin(ctx);

      // Every step consumes budget or a turn, so the server ends the
      // episode well within this many steps.
      const int max_steps = 4 * core::initial_budget(variant) + 8;
      std::string observation;
      for (int step = 0;; ++step) {
        if (step >= max_steps) {
          abort_with("episode did not terminate within " + std::to_string(max_steps) + " steps");
          break;
        }
        std::string text = policy.act(observation);
        t.messages.push_back({"assistant", text});
        const auto sent = Clock::now();
        const Json reply = connection.request(
            Json{{"type", "step"}, {"session_id", *session_id}, {"agent_text", std::move(text)}});
        t.step_latency.push_back(since(sent));
        if (reply.value("type", "") != "step_ok") {
          abort_with(reply.value("code", "PROTOCOL") + ": " + reply.value("message", reply.dump()));
          break;
        }
        observation = reply.at("observation").get<std::string>();
        t.messages.push_back({"tool", observation});
        t.tool_calls = reply.at("calls_used").get<int>();
        if (reply.at("finished").get<bool>()) {
          t.reward = reply.at("reward").get<int>();
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    abort_with(e.what());
  }

  if (session_id) {
    try {
      connection.request(Json{{"type", "close"}, {"session_id", *session_id}});
    } catch (const std::exception&) {
    }
  }
  t.wall_time = since(start);
  return t;
}

std::uint64_t episode_seed(std::uint64_t seed, std::string_view env_string, int sample) {
  return derive_seed(seed, env_string, static_cast<std::uint64_t>(sample));
}

BatchResult run_batch(const ConnectionFactory& connect, const std::vector<std::string>& manifest,
                      const PolicySpec& policy_spec, const core::Registry& registry,
                      const BatchOptions& options) {
  if (options.parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be at least 1");
  if (options.samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be at least 1");

  const auto samples = static_cast<std::size_t>(options.samples);
  const std::size_t jobs = manifest.size() * samples;
  BatchResult out;
  out.trajectories.resize(jobs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::unique_ptr<Policy> policy = make_policy(policy_spec, registry);
    std::unique_ptr<Connection> connection;
    for (auto job = next++; job < jobs; job = next++) {
      const auto& env_string = manifest[job / samples];
      const int sample = static_cast<int>(job % samples);
      auto& slot = out.trajectories[job];
      if (!connection) {
        try {
          connection = connect();
        } catch (const std::exception& e) {
          slot.env_string = env_string;
          slot.variant = options.variant;
          slot.aborted = true;
          slot.error = e.what();
          continue;
        }
      }
      slot = run_episode(*connection, env_string, options.variant, *policy,
                         episode_seed(options.seed, env_string, sample));
      if (slot.aborted && slot.error.find("connection") != std::string::npos) connection.reset();
    }
  };

  const auto threads = std::min(options.parallelism, std::max<std::size_t>(jobs, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  auto& stats = out.stats;
  stats.episodes = jobs;
  std::vector<double> latencies;
  double reward_sum = 0;
  double calls_sum = 0;
  for (const auto& t : out.trajectories) {
    if (t.aborted) {
      ++stats.aborted;
      continue;
    }
    reward_sum += t.reward;
    calls_sum += t.tool_calls;
    for (auto l : t.step_latency) latencies.push_back(static_cast<double>(l.count()) / 1000.0);
  }
  const auto completed = static_cast<double>(jobs - stats.aborted);
  if (completed > 0) {
    stats.mean_reward = reward_sum / completed;
    stats.mean_tool_calls = calls_sum / completed;
  }
  std::sort(latencies.begin(), latencies.end());
  stats.p50_latency_ms = percentile(latencies, 0.50);
  stats.p99_latency_ms = percentile(latencies, 0.99);
  return out;
}

// ---------------- replay buffer ----------------

Json to_json(const Trajectory& t) {
  Json messages = Json::array();
  for (const auto& m : t.messages) messages.push_back(Json{{"role", m.role}, {"content", m.content}});
  return Json{{"env", t.env_string},
              {"variant", core::to_string(t.variant)},
              {"messages", std::move(messages)},
              {"reward", t.reward},
              {"tool_calls", t.tool_calls}};
}

Trajectory trajectory_from_json(const Json& value) {
  Trajectory t;
  try {
    t.env_string = value.at("env").get<std::string>();
    t.variant = core::parse_variant(value.at("variant").get<std::string>());
    for (const auto& m : value.at("messages")) {
      Message msg{m.at("role").get<std::string>(), m.at("content").get<std::string>()};
      if (msg.role != "system" && msg.role != "user" && msg.role != "assistant" && msg.role != "tool") {
        throw Error(ErrorCode::ManifestParseError, "unknown message role '" + msg.role + "'");
      }
      t.messages.push_back(std::move(msg));
    }
    t.reward = value.at("reward").get<int>();
    t.tool_calls = value.at("tool_calls").get<int>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ManifestParseError, std::string("bad trajectory record: ") + e.what());
  }
  return t;
}

std::size_t export_replay_buffer(const std::vector<Trajectory>& trajectories, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  std::size_t written = 0;
  for (const auto& t : trajectories) {
    if (t.aborted) continue;
    OrderedJson record;
    record["env"] = t.env_string;
    record["variant"] = core::to_string(t.variant);
    record["messages"] = OrderedJson::array();
    for (const auto& m : t.messages) {
      OrderedJson msg;
      msg["role"] = m.role;
      msg["content"] = m.content;
      record["messages"].push_back(std::move(msg));
    }
    record["reward"] = t.reward;
    record["tool_calls"] = t.tool_calls;
    out << record.dump(-1, ' ', false, OrderedJson::error_handler_t::replace) << '\n';
    ++written;
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
  return written;
}

std::vector<Trajectory> import_replay_buffer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    Json record = Json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      throw Error(ErrorCode::ManifestParseError, path + ":" + std::to_string(number) + ": invalid JSON");
    }
    out.push_back(trajectory_from_json(record));
  }
  return out;
}

// ---------------- statistics ----------------

TrajectoryStats trajectory_stats(const std::vector<Trajectory>& trajectories,
                                 const std::map<std::string, int>& oracle_calls) {
  if (trajectories.empty()) throw Error(ErrorCode::EmptyInput, "no trajectories");
  TrajectoryStats s;
  s.count = trajectories.size();
  std::vector<double> calls;
  std::map<std::string, std::pair<double, int>> by_env;
  double reward_sum = 0;
  double gap_sum = 0;
  int gap_count = 0;
  for (const auto& t : trajectories) {
    calls.push_back(t.tool_calls);
    reward_sum += t.reward;
    const auto at = t.env_string.find('@');
    auto& bucket = by_env[t.env_string.substr(0, at)];
    bucket.first += t.reward;
    bucket.second += 1;
    if (auto it = oracle_calls.find(t.env_string); it != oracle_calls.end()) {
      gap_sum += t.tool_calls - it->second;
      ++gap_count;
    }
  }
  const auto n = static_cast<double>(s.count);
  double total = 0;
  for (double c : calls) total += c;
  s.mean_tool_calls = total / n;
  std::sort(calls.begin(), calls.end());
  s.median_tool_calls = calls.size() % 2 == 1 ? calls[calls.size() / 2]
                                              : (calls[calls.size() / 2 - 1] + calls[calls.size() / 2]) / 2.0;
  s.mean_reward = reward_sum / n;
  for (const auto& [env, acc] : by_env) s.reward_by_env[env] = acc.first / acc.second;
  if (gap_count > 0) s.oracle_gap = gap_sum / gap_count;
  return s;
}

Json to_json(const TrajectoryStats& s) {
  Json out{{"count", s.count},
           {"mean_tool_calls", s.mean_tool_calls},
           {"median_tool_calls", s.median_tool_calls},
           {"mean_reward", s.mean_reward},
           {"reward_by_env", s.reward_by_env}};
  out["oracle_gap"] = s.oracle_gap ? Json(*s.oracle_gap) : Json(nullptr);
  return out;
}

Json to_json(const BatchStats& s) {
  return Json{{"episodes", s.episodes},
              {"aborted", s.aborted},
              {"mean_reward", s.mean_reward},
              {"mean_tool_calls", s.mean_tool_calls},
              {"p50_latency_ms", s.p50_latency_ms},
              {"p99_latency_ms", s.p99_latency_ms}};
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path);
  std::vector<std::string> lines;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    try {
      core::parse_env_string(text);
    } catch (const Error& e) {
      throw Error(ErrorCode::ManifestParseError, path + ":" + std::to_string(number) + ": " + e.what());
    }
    lines.push_back(std::move(text));
  }
  return lines;
}

}  // namespace codegym::rollout
