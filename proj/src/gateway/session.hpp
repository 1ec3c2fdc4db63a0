#pragma once

// One scenario and its orbit, owned by a single actor thread. Every request,
// rebake and run event is handled on that thread; clients talk to it through
// submit() and receive notifications through subscribe().

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "bake/orbit.hpp"
#include "run/kernel.hpp"

namespace tessellate {

struct SessionOptions {
  BakeContext context;  // launch.working_dir is replaced by the scenario's directory
  std::filesystem::path base_dir = std::filesystem::current_path();
  std::chrono::milliseconds debounce{300};
};

enum class RunStatus { Idle, Running, Stopping };
const char* to_string(RunStatus s);

class Session {
 public:
  using Listener = std::function<void(const std::string& message)>;
  using Reply = std::function<void(Json reply)>;

  explicit Session(SessionOptions options);
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Loads and bakes a scenario before any client connects. Throws
  // std::runtime_error with the parse or io error.
  void open(const std::filesystem::path& scenario);

  // The listener first receives a "welcome" message with the full state,
  // then every notification, in sequence order.
  std::uint64_t subscribe(Listener listener);
  // Returns once the listener will no longer be called. Not callable from
  // inside a listener.
  void unsubscribe(std::uint64_t token);

  // Request: {req_id, method, payload}. The reply callback runs on the actor.
  void submit(Json request, Reply reply);
  Json call(Json request);  // blocking convenience

  // Runs any pending debounced rebake now and waits for it.
  void flush();

  // Snapshot helpers for embedders; both run on the actor.
  Json report();
  RunStatus status();

 private:
  struct Task {
    std::function<void()> fn;
  };

  void post(std::function<void()> fn);
  void loop();

  Json dispatch(const std::string& method, const Json& payload);
  Json state_json() const;
  void broadcast(const std::string& kind, Json payload);
  void touch_description(bool rebake_needed);
  void rebake_now();
  void on_run_event(const RunEvent& e);
  void require_idle() const;

  Json add_element(const std::string& method, const Json& payload);
  Json update_element(const std::string& method, const Json& payload);
  Json remove_element(const std::string& method, const Json& payload);
  Json set_params(const Json& payload);
  Json set_position(const Json& payload);
  Json save(const Json& payload);
  Json load(const Json& payload);
  Json start_run(const Json& payload);
  Json stop_run();
  Json get_pairs(const Json& payload) const;

  SessionOptions options_;

  // Actor state; only touched on the actor thread.
  ScenarioDescription description_;
  Orbit orbit_;
  std::optional<std::filesystem::path> scenario_path_;
  bool dirty_ = false;
  RunStatus status_ = RunStatus::Idle;
  std::optional<std::chrono::steady_clock::time_point> rebake_due_;
  std::map<std::uint64_t, Listener> listeners_;
  std::uint64_t next_listener_ = 1;
  std::uint64_t seq_ = 0;
  std::thread run_thread_;
  std::atomic<bool> stop_run_{false};

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Task> tasks_;
  bool quit_ = false;
  std::thread actor_;
};

// Error raised by a request handler; becomes {"ok": false, "error": code}.
class RequestError : public std::runtime_error {
 public:
  RequestError(std::string code, const std::string& message, Json detail = nullptr)
      : std::runtime_error(message), code_(std::move(code)), detail_(std::move(detail)) {}
  const std::string& code() const { return code_; }
  const Json& detail() const { return detail_; }

 private:
  std::string code_;
  Json detail_;
};

// Writes `text` next to `path` and renames it into place.
void write_file_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace tessellate
