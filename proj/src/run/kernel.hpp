#pragma once

// Time-stepped execution of a baked orbit.

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bake/orbit.hpp"

namespace tessellate {

struct ProgressEvent {
  std::int64_t time = 0;  // simulated time completed so far
  std::int64_t end_time = 0;
};
struct LogEvent {
  std::string level;  // "info" | "warning"
  std::string source;
  std::string message;
};
struct DoneEvent {
  std::int64_t final_time = 0;
};
struct RunErrorEvent {
  std::string source;
  std::string message;
};
using RunEvent = std::variant<ProgressEvent, LogEvent, DoneEvent, RunErrorEvent>;

Json to_json(const RunEvent& e);

using EventSink = std::function<void(const RunEvent&)>;

class CycleError : public std::runtime_error {
 public:
  explicit CycleError(std::vector<std::string> cycle);
  // Simulator ids along the cycle; the first id is repeated at the end.
  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

// Non-delayed dataflow between Ok simulators must be acyclic.
void check_dataflow(const Orbit& o);

// Simulators in dataflow order, ties broken by document order.
std::vector<std::string> dataflow_order(const Orbit& o);

// Latest output values per (entity, attribute). Two generations are kept so
// that delayed connections can read the value from before the current time.
class ValueCache {
 public:
  void record(const EntityRef& e, const std::string& attr, std::int64_t time, Json value);
  const Json* latest(const EntityRef& e, const std::string& attr) const;
  // Most recent value produced strictly before `time`.
  const Json* before(const EntityRef& e, const std::string& attr, std::int64_t time) const;

 private:
  struct Slot {
    std::optional<std::pair<std::int64_t, Json>> current, previous;
  };
  std::map<std::pair<EntityRef, std::string>, Slot> slots_;
};

class MissingValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Appends the connection's contributions at time `t` to `into` (keyed by
// target entity id). Returns the number of entries delivered.
std::size_t route_inputs(const std::string& connection_id, const ResolvedConnection& conn, const ValueCache& cache,
                         std::int64_t t, StepInputs& into);

struct RunSummary {
  enum class Outcome { Completed, Stopped, Failed };
  Outcome outcome = Outcome::Completed;
  std::int64_t final_time = 0;
  std::string error;
  std::map<std::string, std::vector<std::int64_t>> step_times;  // per simulator
};

// Runs the orbit until every simulator's next step is at or past
// params.end_time. Emits exactly one Done or RunError. Throws CycleError
// before anything is stepped.
RunSummary run(Orbit& o, const ScenarioParams& params, const EventSink& sink,
               const std::atomic<bool>* stop_signal = nullptr);

}  // namespace tessellate
