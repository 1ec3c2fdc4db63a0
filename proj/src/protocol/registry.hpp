#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "protocol/handle.hpp"
#include "protocol/server.hpp"

namespace tessellate {

struct CommandLaunch {
  std::vector<std::string> command;  // the launcher appends "--port <n>"

  bool operator==(const CommandLaunch&) const = default;
};

struct BuiltinLaunch {
  std::string builtin;

  bool operator==(const BuiltinLaunch&) const = default;
};

struct RegistryEntry {
  std::string key;
  std::string display_name;
  std::string icon;
  std::variant<CommandLaunch, BuiltinLaunch> launch;

  bool operator==(const RegistryEntry&) const = default;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<RegistryEntry> entries);

  const std::vector<RegistryEntry>& entries() const { return entries_; }
  const RegistryEntry* find(const std::string& key) const;

 private:
  std::vector<RegistryEntry> entries_;
};

// Registry file: JSON list of {key, display_name, icon, launch}. Relative
// command paths containing a '/' resolve against `base_dir`. Throws
// RegistryError.
Registry parse_registry(std::string_view text, const std::filesystem::path& base_dir = {});
Registry load_registry(const std::filesystem::path& path);
nlohmann::json registry_to_json(const Registry& r);

// The four reference simulators, launched in-process.
Registry default_registry();

// What a builtin simulator factory gets to know about its instance.
struct SimulatorContext {
  std::string instance_id;
  std::filesystem::path working_dir;  // relative file params resolve here
};

using SimulatorFactory = std::function<std::unique_ptr<Simulator>(const SimulatorContext&)>;

class BuiltinCatalog {
 public:
  void add(std::string key, SimulatorFactory factory);
  const SimulatorFactory* find(const std::string& key) const;

 private:
  std::map<std::string, SimulatorFactory> factories_;
};

struct LaunchOptions {
  std::chrono::milliseconds connect_timeout{10000};
  std::chrono::milliseconds stop_grace = kDefaultStopGrace;
  std::chrono::milliseconds request_timeout = kDefaultRequestTimeout;
  std::filesystem::path working_dir;
};

// Starts the simulator for `entry` and returns a connected handle ready for
// init. Throws SimFailure (SpawnFailed, ConnectTimeout).
std::shared_ptr<SimulatorHandle> launch(const RegistryEntry& entry, const std::string& instance_id,
                                        const BuiltinCatalog& catalog, const LaunchOptions& options);

}  // namespace tessellate
