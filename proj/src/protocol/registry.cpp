#include "protocol/registry.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

extern char** environ;

namespace tessellate {

Registry::Registry(std::vector<RegistryEntry> entries) : entries_(std::move(entries)) {}

const RegistryEntry* Registry::find(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.key == key) return &e;
  return nullptr;
}

Registry parse_registry(std::string_view text, const std::filesystem::path& base_dir) {
  Json doc = Json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) throw RegistryError("registry is not valid JSON");
  if (!doc.is_array()) throw RegistryError("registry must be a JSON list");
  std::vector<RegistryEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Json& e = doc[i];
    std::string where = "registry entry " + std::to_string(i);
    if (!e.is_object()) throw RegistryError(where + " is not an object");
    for (const auto& [k, _] : e.items())
      if (k != "key" && k != "display_name" && k != "icon" && k != "launch")
        throw RegistryError(where + " has unknown field '" + k + "'");
    if (!e.contains("key") || !e["key"].is_string() || e["key"].get<std::string>().empty())
      throw RegistryError(where + " needs a non-empty 'key'");
    RegistryEntry entry;
    entry.key = e["key"].get<std::string>();
    entry.display_name = e.value("display_name", entry.key);
    entry.icon = e.value("icon", "");
    if (!e.contains("launch") || !e["launch"].is_object())
      throw RegistryError(where + " needs a 'launch' object");
    const Json& l = e["launch"];
    if (l.contains("builtin") && l["builtin"].is_string() && l.size() == 1) {
      entry.launch = BuiltinLaunch{l["builtin"].get<std::string>()};
    } else if (l.contains("command") && l["command"].is_array() && !l["command"].empty() && l.size() == 1) {
      CommandLaunch cmd;
      for (const auto& part : l["command"]) {
        if (!part.is_string()) throw RegistryError(where + " command parts must be strings");
        cmd.command.push_back(part.get<std::string>());
      }
      std::filesystem::path exe(cmd.command[0]);
      if (exe.is_relative() && cmd.command[0].find('/') != std::string::npos && !base_dir.empty())
        cmd.command[0] = (base_dir / exe).lexically_normal().string();
      entry.launch = std::move(cmd);
    } else {
      throw RegistryError(where + " launch must be {\"command\":[...]} or {\"builtin\":\"...\"}");
    }
    if (std::any_of(entries.begin(), entries.end(), [&](const auto& x) { return x.key == entry.key; }))
      throw RegistryError("duplicate registry key '" + entry.key + "'");
    entries.push_back(std::move(entry));
  }
  return Registry(std::move(entries));
}

Registry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RegistryError("cannot read registry file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_registry(ss.str(), std::filesystem::absolute(path).parent_path());
}

nlohmann::json registry_to_json(const Registry& r) {
  Json out = Json::array();
  for (const auto& e : r.entries()) {
    Json launch;
    if (const auto* c = std::get_if<CommandLaunch>(&e.launch)) launch = {{"command", c->command}};
    else launch = {{"builtin", std::get<BuiltinLaunch>(e.launch).builtin}};
    out.push_back({{"key", e.key}, {"display_name", e.display_name}, {"icon", e.icon}, {"launch", launch}});
  }
  return out;
}

Registry default_registry() {
  return Registry({
      {"grid-sim", "Grid", "grid", BuiltinLaunch{"grid-sim"}},
      {"pv-sim", "Renewables", "sun", BuiltinLaunch{"pv-sim"}},
      {"controller-sim", "Controllers", "controller", BuiltinLaunch{"controller-sim"}},
      {"collector-sim", "Collector", "database", BuiltinLaunch{"collector-sim"}},
  });
}

void BuiltinCatalog::add(std::string key, SimulatorFactory factory) {
  factories_[std::move(key)] = std::move(factory);
}

const SimulatorFactory* BuiltinCatalog::find(const std::string& key) const {
  auto it = factories_.find(key);
  return it == factories_.end() ? nullptr : &it->second;
}

namespace {

class ThreadPeer final : public Peer {
 public:
  ThreadPeer(std::unique_ptr<Simulator> sim, std::unique_ptr<LineChannel> channel)
      : state_(std::make_shared<State>()) {
    auto state = state_;
    thread_ = std::thread([state, sim = std::move(sim), channel = std::move(channel)]() mutable {
      serve_simulator(*channel, *sim);
      sim.reset();
      std::lock_guard lock(state->mu);
      state->done = true;
      state->cv.notify_all();
    });
  }

  ~ThreadPeer() override {
    if (!thread_.joinable()) return;
    std::unique_lock lock(state_->mu);
    bool done = state_->done;
    lock.unlock();
    if (done) thread_.join();
    else thread_.detach();
  }

  bool wait_exit(std::chrono::steady_clock::time_point deadline) override {
    std::unique_lock lock(state_->mu);
    return state_->cv.wait_until(lock, deadline, [&] { return state_->done; });
  }

  void kill() override {}

 private:
  struct State {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
  };
  std::shared_ptr<State> state_;
  std::thread thread_;
};

class ProcessPeer final : public Peer {
 public:
  explicit ProcessPeer(pid_t pid) : pid_(pid) {}
  ~ProcessPeer() override {
    if (!reaped_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  bool wait_exit(std::chrono::steady_clock::time_point deadline) override {
    for (;;) {
      if (poll_exit()) return true;
      if (std::chrono::steady_clock::now() >= deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  void kill() override {
    if (reaped_) return;
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    reaped_ = true;
  }

  bool poll_exit() {
    if (reaped_) return true;
    pid_t r = ::waitpid(pid_, nullptr, WNOHANG);
    if (r == pid_ || r < 0) reaped_ = true;
    return reaped_;
  }

 private:
  pid_t pid_;
  bool reaped_ = false;
};

std::shared_ptr<SimulatorHandle> launch_builtin(const BuiltinLaunch& b, const std::string& instance_id,
                                                const BuiltinCatalog& catalog, const LaunchOptions& options) {
  const SimulatorFactory* factory = catalog.find(b.builtin);
  if (!factory)
    throw SimFailure(SimFailure::Kind::SpawnFailed, "unknown_builtin", "no builtin simulator '" + b.builtin + "'");
  auto sim = (*factory)(SimulatorContext{instance_id, options.working_dir});
  auto [client, server] = make_loopback_pair();
  auto peer = std::make_unique<ThreadPeer>(std::move(sim), std::move(server));
  return std::make_shared<SimulatorHandle>(instance_id, std::move(client), std::move(peer), options.stop_grace,
                                           options.request_timeout);
}

std::shared_ptr<SimulatorHandle> launch_command(const CommandLaunch& c, const std::string& instance_id,
                                                const LaunchOptions& options) {
  LocalListener listener;
  std::vector<std::string> args = c.command;
  args.push_back("--port");
  args.push_back(std::to_string(listener.port()));
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  std::string dir = options.working_dir.string();
  if (!dir.empty()) posix_spawn_file_actions_addchdir_np(&actions, dir.c_str());
  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0)
    throw SimFailure(SimFailure::Kind::SpawnFailed, "spawn_failed",
                     "cannot start '" + c.command[0] + "': " + std::strerror(rc));
  auto peer = std::make_unique<ProcessPeer>(pid);

  auto deadline = std::chrono::steady_clock::now() + options.connect_timeout;
  int fd = -1;
  while (fd < 0) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    fd = listener.accept_for(std::min(left, std::chrono::milliseconds(50)));
    if (fd < 0 && peer->poll_exit())
      throw SimFailure(SimFailure::Kind::SpawnFailed, "spawn_failed",
                       "'" + c.command[0] + "' exited before connecting");
  }
  if (fd < 0) {
    peer->kill();
    throw SimFailure(SimFailure::Kind::ConnectTimeout, "connect_timeout",
                     "'" + c.command[0] + "' did not connect within " +
                         std::to_string(options.connect_timeout.count()) + " ms");
  }
  return std::make_shared<SimulatorHandle>(instance_id, make_socket_channel(fd), std::move(peer),
                                           options.stop_grace, options.request_timeout);
}

}  // namespace

std::shared_ptr<SimulatorHandle> launch(const RegistryEntry& entry, const std::string& instance_id,
                                        const BuiltinCatalog& catalog, const LaunchOptions& options) {
  if (const auto* b = std::get_if<BuiltinLaunch>(&entry.launch))
    return launch_builtin(*b, instance_id, catalog, options);
  return launch_command(std::get<CommandLaunch>(entry.launch), instance_id, options);
}

}  // namespace tessellate
