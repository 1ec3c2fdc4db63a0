#pragma once

// The orbit: a scenario description baked into live simulators, plus the
// bookkeeping that ties every concrete element back to the abstract element
// that produced it.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "common/digraph.hpp"
#include "protocol/handle.hpp"
#include "protocol/registry.hpp"
#include "relation/pairset.hpp"
#include "scenario/scenario.hpp"

namespace tessellate {

enum class BakePhase { Launch, Init, ResolveSource, ResolveRelation, Connect };
const char* to_string(BakePhase phase);

struct ElementState {
  enum class Kind { Ok, Failed, Blocked };
  Kind kind = Kind::Ok;
  std::optional<ElementId> blocked_on;  // Blocked only

  static ElementState ok() { return {}; }
  static ElementState failed() { return {Kind::Failed, std::nullopt}; }
  static ElementState blocked(ElementId on) { return {Kind::Blocked, std::move(on)}; }

  bool is_ok() const { return kind == Kind::Ok; }
  bool operator==(const ElementState&) const = default;
};

const char* to_string(ElementState::Kind kind);

struct BakingProblem {
  ElementId element;
  BakePhase phase = BakePhase::Launch;
  std::string code;
  std::string message;
  // Every element whose blocking chain ends at `element`.
  std::vector<ElementId> blocked_dependents;
};

struct ResolvedEntity {
  EntityRef ref;
  EntityRecord record;
};

struct ResolvedConnection {
  std::string source_simulator;
  std::string target_simulator;
  PairSet pairs;
  std::size_t dropped = 0;
  std::vector<AttrPair> attr_pairs;
  bool delayed = false;
  std::map<std::string, Json> initial_values;
};

struct LiveSimulator {
  std::shared_ptr<SimulatorHandle> handle;
  SimulatorMeta meta;
  std::string registry_key;
  Json init_params;
};

// Effecting calls made against the live world, in order.
struct LaunchCall {
  std::string simulator_id;
  std::string registry_key;
};
struct InitCall {
  std::string simulator_id;
  Json params;
};
struct CreateCall {
  std::string simulator_id;
  std::string model;
  std::string entity_id;
  Json params;
  std::vector<EntityRecord> records;  // requested record followed by children
};
struct ConnectCall {
  std::string connection_id;
  std::string source_simulator;
  std::string target_simulator;
  std::vector<EntityPair> pairs;  // pairs added by this call
  std::vector<AttrPair> attr_pairs;
  bool delayed = false;
  std::map<std::string, Json> initial_values;
};
using WorldCall = std::variant<LaunchCall, InitCall, CreateCall, ConnectCall>;

enum class BakeMode { Fresh, Incremental, FullReset };
const char* to_string(BakeMode mode);

struct Orbit {
  ScenarioDescription description;
  std::map<std::string, LiveSimulator> simulators;                 // Ok simulators only
  std::map<std::string, std::vector<ResolvedEntity>> tesserae;     // Ok tesserae only
  std::map<std::string, ResolvedConnection> connections;           // Ok connections only
  std::map<ElementId, ElementState> states;
  std::vector<BakingProblem> problems;
  std::vector<WorldCall> world_log;
  // Every entity record known per live simulator (created and children).
  std::map<std::string, std::map<std::string, EntityRecord>> simulator_entities;

  BakeMode mode = BakeMode::Fresh;
  // Set once a run has advanced the simulators; a simulated world cannot be
  // rebaked incrementally.
  bool ran = false;
  std::string reset_reason;  // set when mode == FullReset

  Orbit() = default;
  Orbit(Orbit&&) = default;
  Orbit& operator=(Orbit&&) = default;

  // Stops every simulator process; the orbit is unusable afterwards.
  void shutdown();

  const ElementState* state_of(const ElementId& e) const;
};

// --- dependency graph -------------------------------------------------------

struct DependencyGraph {
  std::vector<ElementId> nodes;  // unique elements in document order
  Adjacency deps;                // deps[i]: indices node i depends on, ascending

  std::optional<std::size_t> index_of(const ElementId& e) const;
  std::vector<ElementId> dependencies_of(const ElementId& e) const;
};

DependencyGraph build_dependency_graph(const ScenarioDescription& d);

// --- baking -----------------------------------------------------------------

struct BakeContext {
  Registry registry;
  BuiltinCatalog catalog;
  LaunchOptions launch;
};

// Fresh bake. Never throws for scenario problems; they end up in the orbit.
Orbit bake(const ScenarioDescription& d, const BakeContext& ctx);

// Rebakes `prior` to `d_new`, reusing the live world when the change is
// purely additive and falling back to a full reset otherwise. The resolved
// state always equals that of bake(d_new).
Orbit rebake(Orbit prior, const ScenarioDescription& d_new, const BakeContext& ctx);

// Records sorted by entity id, filtered by glob and all predicates.
std::vector<EntityRecord> resolve_select(const Select& source, const std::vector<EntityRecord>& records);

// Glob with '*' (any run) and '?' (one character); everything else literal.
bool glob_match(std::string_view pattern, std::string_view text);
bool predicate_holds(const Predicate& p, const Json& extra_info);

// --- reporting --------------------------------------------------------------

Json orbit_report(const Orbit& o, bool include_pairs = false);
Json pairs_to_json(const PairSet& p);

}  // namespace tessellate
