#pragma once

// Abstract scenario description: simulators, tesserae (entity-set
// specifications) and the connections between them. Everything here is a
// plain value; list order is the canonical order used by every later stage.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tessellate {

using Json = nlohmann::json;

struct SimulatorSpec {
  std::string id;
  std::string registry_key;
  Json init_params = Json::object();
  std::string display_name;

  bool operator==(const SimulatorSpec&) const = default;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

struct Predicate {
  std::string key;
  CompareOp op = CompareOp::Eq;
  Json value;

  bool operator==(const Predicate&) const = default;
};

struct CreateFixed {
  std::int64_t count = 0;
  Json create_params = Json::object();

  bool operator==(const CreateFixed&) const = default;
};

struct CreateMatching {
  std::string size_of;
  Json create_params = Json::object();

  bool operator==(const CreateMatching&) const = default;
};

struct Select {
  std::string id_pattern = "*";
  std::vector<Predicate> predicates;

  bool operator==(const Select&) const = default;
};

using EntitySource = std::variant<CreateFixed, CreateMatching, Select>;

inline bool is_create_source(const EntitySource& s) {
  return !std::holds_alternative<Select>(s);
}

struct TesseraSpec {
  std::string id;
  std::string name;
  std::string icon;
  std::string simulator_id;
  std::string model;
  std::vector<EntitySource> sources;

  bool operator==(const TesseraSpec&) const = default;
};

struct EmptyRelation {
  bool operator==(const EmptyRelation&) const = default;
};
struct OneToOne {
  bool operator==(const OneToOne&) const = default;
};
struct RandomRelation {
  bool allow_repeat = false;
  std::uint64_t seed = 0;

  bool operator==(const RandomRelation&) const = default;
};
struct ManyToOne {
  bool operator==(const ManyToOne&) const = default;
};
struct ManualRelation {
  std::vector<std::pair<std::string, std::string>> pairs;

  bool operator==(const ManualRelation&) const = default;
};

enum class Direction { Forward, Backward };

struct CompositionStep {
  std::string connection;
  Direction direction = Direction::Forward;

  bool operator==(const CompositionStep&) const = default;
};

struct CompositionRelation {
  std::vector<CompositionStep> path;

  bool operator==(const CompositionRelation&) const = default;
};

using Relation = std::variant<EmptyRelation, OneToOne, RandomRelation,
                              ManyToOne, ManualRelation, CompositionRelation>;

struct AttrPair {
  std::string source;
  std::string target;

  bool operator==(const AttrPair&) const = default;
};

struct ConnectionSpec {
  std::string id;
  std::string source;
  std::string target;
  std::vector<AttrPair> attr_pairs;
  Relation relation = EmptyRelation{};
  bool delayed = false;
  std::map<std::string, Json> initial_values;

  bool operator==(const ConnectionSpec&) const = default;
};

struct ScenarioParams {
  std::int64_t end_time = 3600;
  std::optional<double> real_time_factor;
  std::uint64_t master_seed = 0;

  bool operator==(const ScenarioParams&) const = default;
};

struct NodePosition {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const NodePosition&) const = default;
};

struct ScenarioDescription {
  std::vector<SimulatorSpec> simulators;
  std::vector<TesseraSpec> tesserae;
  std::vector<ConnectionSpec> connections;
  ScenarioParams params;
  std::map<std::string, NodePosition> layout;

  bool operator==(const ScenarioDescription&) const = default;

  const SimulatorSpec* find_simulator(const std::string& id) const;
  const TesseraSpec* find_tessera(const std::string& id) const;
  const ConnectionSpec* find_connection(const std::string& id) const;
};

// Element identity across the three element kinds. Ordering is by kind
// (simulators, tesserae, connections) then id.
enum class ElementKind { Simulator, Tessera, Connection };

struct ElementId {
  ElementKind kind = ElementKind::Simulator;
  std::string id;

  auto operator<=>(const ElementId&) const = default;
  bool operator==(const ElementId&) const = default;
};

const char* to_string(ElementKind kind);
std::optional<ElementKind> element_kind_from_string(const std::string& s);
std::string to_string(const ElementId& e);

const char* to_string(CompareOp op);
const char* to_string(Direction d);
const char* relation_kind(const Relation& r);

// --- canonical file format -------------------------------------------------

inline constexpr int kFormatVersion = 1;

struct ParseError {
  std::string path;  // JSON pointer into the document, empty for syntax errors
  int line = 0;      // 1-based, 0 when unknown
  int column = 0;
  std::string message;
};

struct ParseOutcome {
  std::optional<ScenarioDescription> description;
  std::vector<ParseError> errors;

  bool ok() const { return description.has_value(); }
};

ParseOutcome parse_description(std::string_view text);
ParseOutcome parse_description_json(const Json& doc);

std::string serialize_description(const ScenarioDescription& d);
Json description_to_json(const ScenarioDescription& d);

// Element-level encoders shared with the gateway's edit operations.
Json simulator_to_json(const SimulatorSpec& s);
Json tessera_to_json(const TesseraSpec& t);
Json connection_to_json(const ConnectionSpec& c);
Json params_to_json(const ScenarioParams& p);
Json relation_to_json(const Relation& r);

// Decoders for single elements; on failure `errors` is non-empty.
std::optional<SimulatorSpec> simulator_from_json(const Json& j, std::vector<ParseError>& errors);
std::optional<TesseraSpec> tessera_from_json(const Json& j, std::vector<ParseError>& errors);
std::optional<ConnectionSpec> connection_from_json(const Json& j, std::vector<ParseError>& errors);
std::optional<ScenarioParams> params_from_json(const Json& j, std::vector<ParseError>& errors);

std::string format_parse_errors(const std::vector<ParseError>& errors);

// --- structural validation -------------------------------------------------

struct ValidationIssue {
  std::optional<ElementId> element;
  std::string code;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

std::vector<ValidationIssue> validate_description(const ScenarioDescription& d);

Json issues_to_json(const std::vector<ValidationIssue>& issues);

}  // namespace tessellate
