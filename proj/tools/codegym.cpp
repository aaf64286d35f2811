// codegym: serve environments, verify them, curate instances, run rollouts.

#include <signal.h>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "codegym/curator.hpp"
#include "codegym/env_library.hpp"
#include "codegym/executor.hpp"
#include "codegym/gym_server.hpp"
#include "codegym/rollout.hpp"
#include "codegym/verifier.hpp"

namespace {

using namespace codegym;

// A registry file is either a JSON list of environment names, an object
// with an "envs" list, or plain text with one name per line.
core::Registry load_registry(const std::string& path) {
  const auto& builtin = envs::builtin_registry();
  if (path.empty()) return builtin;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open registry file " + path);
  std::stringstream text;
  text << in.rdbuf();
  std::vector<std::string> names;
  Json parsed = Json::parse(text.str(), nullptr, false, true);
  if (!parsed.is_discarded() && (parsed.is_array() || parsed.is_object())) {
    const Json& list = parsed.is_object() ? parsed.at("envs") : parsed;
    names = list.get<std::vector<std::string>>();
  } else {
    std::string line;
    std::istringstream lines(text.str());
    while (std::getline(lines, line)) {
      const auto a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos || line[a] == '#') continue;
      const auto b = line.find_last_not_of(" \t\r");
      names.push_back(line.substr(a, b - a + 1));
    }
  }
  return builtin.subset(names);
}

core::Variant variant_option(const std::string& text) { return core::parse_variant(text); }

std::vector<std::string> select_envs(const core::Registry& registry, const std::string& which) {
  if (which == "all") return registry.names();
  registry.at(which);
  return {which};
}

void write_json(const std::string& path, const Json& value) {
  if (path.empty() || path == "-") {
    std::cout << value.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << value.dump(2) << '\n';
}

// ---------------- serve ----------------

struct ServeArgs {
  std::string listen = "127.0.0.1:7777";
  std::string registry;
  std::size_t max_sessions = 1024;
  long idle_timeout = 600;
  std::string limits;
  std::string isolation = "process";
  std::size_t workers = 16;
};

int run_serve(const ServeArgs& args) {
  const auto registry = load_registry(args.registry);
  server::ServerConfig config;
  config.listen = args.listen;
  config.max_sessions = args.max_sessions;
  config.idle_timeout = std::chrono::seconds(args.idle_timeout);
  if (!args.limits.empty()) config.limits = exec::LimitsConfig::load(args.limits);

  // Block termination signals before any thread exists; a dedicated thread
  // waits for them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<exec::Executor> executor;
  if (args.isolation == "process") {
    executor = std::make_unique<exec::ProcessPoolExecutor>(registry, args.workers);
  } else if (args.isolation == "inprocess") {
    executor = std::make_unique<exec::InProcessExecutor>();
  } else {
    throw Error(ErrorCode::InvalidArgument, "--isolation must be 'process' or 'inprocess'");
  }

  server::SessionManager sessions(registry, *executor, config);
  server::Server srv(sessions);
  std::cerr << "codegym: listening on port " << srv.port() << " (" << registry.names().size()
            << " environments, isolation=" << args.isolation << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "codegym: signal " << sig << ", draining" << std::endl;
    srv.stop();
  });
  srv.run();
  waiter.join();
  return 0;
}

// ---------------- verify ----------------

struct VerifyArgs {
  std::string env = "all";
  std::string tests;
  int k = verify::kDefaultK;
  std::string out = "report.json";
  std::string variant = "standard";
  std::uint64_t seed = 1;
  long wall_time_ms = 2000;
  std::size_t parallelism = 1;
  bool no_isolate = false;
  std::string registry;
};

int run_verify(const VerifyArgs& args) {
  const auto registry = load_registry(args.registry);
  const auto variant = variant_option(args.variant);
  verify::VerifyOptions options;
  options.limits.wall_time = std::chrono::milliseconds(args.wall_time_ms);
  options.isolate = !args.no_isolate;
  options.parallelism = args.parallelism;

  std::map<std::string, std::vector<core::TaskConfig>> tests;
  if (!args.tests.empty()) {
    for (const auto& line : rollout::read_manifest(args.tests)) {
      auto [name, config] = core::parse_env_string(line);
      tests[name].push_back(std::move(config));
    }
  }

  Json report = Json::array();
  bool all_good = true;
  for (const auto& name : select_envs(registry, args.env)) {
    const auto& env = registry.at(name);
    std::vector<core::TaskConfig> configs;
    if (args.tests.empty()) {
      configs = variant == core::Variant::Hard ? envs::generate_hard_unit_tests(env, args.seed, 30)
                                               : envs::generate_default_suite(env, args.seed);
    } else if (auto it = tests.find(name); it != tests.end()) {
      configs = it->second;
    }
    if (configs.empty()) {
      if (args.env != "all") throw Error(ErrorCode::InvalidArgument, "no tests for " + name);
      continue;
    }
    const auto correctness = verify::check_correctness(registry, name, configs, variant, options);
    const auto solvability = verify::check_solvability(
        registry, name, configs, verify::default_candidates(env, args.k), args.k, variant, options);
    Json entry = verify::to_json(solvability);
    entry["correctness"] = verify::to_json(correctness);
    report.push_back(std::move(entry));
    all_good = all_good && solvability.solvable && !correctness.faulty;
    std::cerr << name << ": " << configs.size() << " tests, solvable=" << std::boolalpha
              << solvability.solvable << ", faulty=" << correctness.faulty << '\n';
  }
  write_json(args.out, report);
  return all_good ? 0 : 1;
}

// ---------------- curate ----------------

struct CurateArgs {
  std::string in;
  std::string out = "records.jsonl";
  std::string evaluator = "noisy-oracle:p=0.5";
  int trials = curate::kDefaultTrials;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  std::string variant = "standard";
  std::string registry;
};

int run_curate(const CurateArgs& args) {
  const auto registry = load_registry(args.registry);
  curate::CurateOptions options;
  options.evaluator = rollout::parse_policy_spec(args.evaluator);
  options.trials = args.trials;
  options.seed = args.seed;
  options.parallelism = args.parallelism;
  options.variant = variant_option(args.variant);
  const auto summary = curate::curate_corpus(registry, args.in, options, args.out);
  std::cout << curate::to_json(summary).dump(2) << '\n';
  return 0;
}

// ---------------- rollout ----------------

struct RolloutArgs {
  std::string server = "127.0.0.1:7777";
  std::string manifest;
  std::string policy = "oracle";
  int samples = 8;
  std::size_t parallelism = 64;
  std::string export_path;
  std::uint64_t seed = 0;
  std::string variant = "standard";
  std::string registry;
};

int run_rollout(const RolloutArgs& args) {
  const auto registry = load_registry(args.registry);
  const auto manifest = rollout::read_manifest(args.manifest);
  const auto spec = rollout::parse_policy_spec(args.policy);
  rollout::BatchOptions options;
  options.parallelism = args.parallelism;
  options.samples = args.samples;
  options.seed = args.seed;
  options.variant = variant_option(args.variant);

  // "local" runs an in-process server instead of connecting to one.
  std::unique_ptr<exec::InProcessExecutor> executor;
  std::unique_ptr<server::SessionManager> sessions;
  rollout::ConnectionFactory connect;
  if (args.server == "local") {
    executor = std::make_unique<exec::InProcessExecutor>();
    sessions = std::make_unique<server::SessionManager>(registry, *executor, server::ServerConfig{});
    connect = rollout::local_factory(*sessions);
  } else {
    connect = rollout::tcp_factory(args.server);
  }

  const auto batch = rollout::run_batch(connect, manifest, spec, registry, options);
  Json out{{"batch", rollout::to_json(batch.stats)}};
  std::vector<rollout::Trajectory> completed;
  for (const auto& t : batch.trajectories) {
    if (!t.aborted) completed.push_back(t);
  }
  if (!completed.empty()) {
    std::map<std::string, int> oracle_calls;
    for (const auto& line : manifest) {
      try {
        const auto [name, config] = core::parse_env_string(line);
        oracle_calls[line] =
            static_cast<int>(envs::oracle_solve(registry, name, config, options.variant).calls.size());
      } catch (const Error&) {
        // No local oracle for this line; it is left out of the gap.
      }
    }
    out["trajectories"] = rollout::to_json(rollout::trajectory_stats(completed, oracle_calls));
  }
  if (!args.export_path.empty()) {
    out["exported"] = rollout::export_replay_buffer(batch.trajectories, args.export_path);
  }
  std::cout << out.dump(2) << '\n';
  for (const auto& t : batch.trajectories) {
    if (t.aborted) std::cerr << "aborted: " << t.env_string << ": " << t.error << '\n';
  }
  return batch.stats.aborted == 0 ? 0 : 1;
}

// ---------------- generate ----------------

struct GenerateArgs {
  std::string env = "all";
  std::uint64_t seed = 1;
  int count = 30;
  bool hard = false;
  std::string out = "-";
  std::string registry;
};

int run_generate(const GenerateArgs& args) {
  const auto registry = load_registry(args.registry);
  std::ostringstream text;
  for (const auto& name : select_envs(registry, args.env)) {
    const auto& env = registry.at(name);
    std::vector<core::TaskConfig> configs;
    if (args.hard) {
      configs = envs::generate_hard_unit_tests(env, args.seed, args.count);
    } else if (args.count == 30) {
      configs = envs::generate_default_suite(env, args.seed);
    } else {
      configs = envs::generate_unit_tests(env, args.seed, args.count);
    }
    for (const auto& c : configs) text << core::encode_env_string(name, c) << '\n';
  }
  if (args.out == "-") {
    std::cout << text.str();
  } else {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + args.out);
    out << text.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CodeGym environment runtime"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the environment server");
  s->add_option("--listen", serve.listen, "host:port to listen on")->envname("CODEGYM_LISTEN");
  s->add_option("--registry", serve.registry, "File listing the environments to expose")
      ->envname("CODEGYM_REGISTRY");
  s->add_option("--max-sessions", serve.max_sessions, "Session cap")->envname("CODEGYM_MAX_SESSIONS");
  s->add_option("--idle-timeout", serve.idle_timeout, "Seconds before an idle session is reaped")
      ->envname("CODEGYM_IDLE_TIMEOUT")
      ->check(CLI::PositiveNumber);
  s->add_option("--limits", serve.limits, "JSON file with execution limits")->envname("CODEGYM_LIMITS");
  s->add_option("--isolation", serve.isolation, "process or inprocess")->envname("CODEGYM_ISOLATION");
  s->add_option("--workers", serve.workers, "Worker processes for process isolation")
      ->envname("CODEGYM_WORKERS")
      ->check(CLI::PositiveNumber);

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Check correctness and pass@k solvability");
  v->add_option("--env", ver.env, "Environment name or 'all'");
  v->add_option("--tests", ver.tests, "Manifest of env-strings (default: generated suite)");
  v->add_option("--k", ver.k, "Number of candidates")->check(CLI::Range(1, 100));
  v->add_option("--out", ver.out, "Report path ('-' for stdout)");
  v->add_option("--variant", ver.variant, "standard or hard");
  v->add_option("--seed", ver.seed, "Seed for generated suites");
  v->add_option("--wall-time-ms", ver.wall_time_ms, "Per-call time limit")->check(CLI::PositiveNumber);
  v->add_option("--parallelism", ver.parallelism, "Concurrent unit tests")->check(CLI::PositiveNumber);
  v->add_flag("--no-isolate", ver.no_isolate, "Run episodes in this process");
  v->add_option("--registry", ver.registry, "File listing the environments")->envname("CODEGYM_REGISTRY");

  CurateArgs cur;
  auto* c = app.add_subcommand("curate", "Apply the complexity and difficulty filters");
  c->add_option("--in", cur.in, "Manifest of env-strings")->required();
  c->add_option("--out", cur.out, "Records output (JSON lines)");
  c->add_option("--evaluator", cur.evaluator, "Evaluator policy");
  c->add_option("--trials", cur.trials, "Episodes per instance")->check(CLI::PositiveNumber);
  c->add_option("--seed", cur.seed, "Evaluator seed");
  c->add_option("--parallelism", cur.parallelism, "Concurrent instances")->check(CLI::PositiveNumber);
  c->add_option("--variant", cur.variant, "standard or hard");
  c->add_option("--registry", cur.registry, "File listing the environments")->envname("CODEGYM_REGISTRY");

  RolloutArgs roll;
  auto* r = app.add_subcommand("rollout", "Run a policy over a manifest");
  r->add_option("--server", roll.server, "Server host:port, or 'local'")->envname("CODEGYM_SERVER");
  r->add_option("--manifest", roll.manifest, "Manifest of env-strings")->required();
  r->add_option("--policy", roll.policy, "oracle, random, noisy-oracle:p=<prob>, scripted:<file>");
  r->add_option("--samples", roll.samples, "Episodes per instance")->check(CLI::PositiveNumber);
  r->add_option("--parallelism", roll.parallelism, "Concurrent episodes")->check(CLI::PositiveNumber);
  r->add_option("--export", roll.export_path, "Replay buffer output (JSON lines)");
  r->add_option("--seed", roll.seed, "Base seed");
  r->add_option("--variant", roll.variant, "standard or hard");
  r->add_option("--registry", roll.registry, "File listing the environments")->envname("CODEGYM_REGISTRY");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a manifest of generated unit tests");
  g->add_option("--env", gen.env, "Environment name or 'all'");
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--count", gen.count, "Configs per environment")->check(CLI::PositiveNumber);
  g->add_flag("--hard", gen.hard, "Scaled tier for the hard variant");
  g->add_option("--out", gen.out, "Output path ('-' for stdout)");
  g->add_option("--registry", gen.registry, "File listing the environments")->envname("CODEGYM_REGISTRY");

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return run_serve(serve);
    if (v->parsed()) return run_verify(ver);
    if (c->parsed()) return run_curate(cur);
    if (r->parsed()) return run_rollout(roll);
    if (g->parsed()) return run_generate(gen);
  } catch (const Error& e) {
    std::cerr << "codegym: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "codegym: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
