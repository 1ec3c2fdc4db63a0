#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relation/pairset.hpp"

namespace tessellate {

using Json = nlohmann::json;

// Failure of a simulator interaction, as seen by the orchestrator.
class SimFailure : public std::runtime_error {
 public:
  enum class Kind {
    SpawnFailed,
    ConnectTimeout,
    SimError,       // the simulator reported an error
    ProtocolError,  // malformed traffic or state-machine violation
    TransportClosed,
  };

  SimFailure(Kind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  Kind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  Kind kind_;
  std::string code_;
};

const char* to_string(SimFailure::Kind kind);

struct ParamDescriptor {
  std::string name;
  std::string type;  // "string" | "number" | "integer" | "boolean" | "object"
  std::optional<std::vector<Json>> allowed;
  std::optional<std::string> unit;
  std::string doc;

  bool operator==(const ParamDescriptor&) const = default;
};

// An input list containing "*" accepts any attribute name.
struct ModelMeta {
  std::vector<ParamDescriptor> create_params;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  bool accepts_input(const std::string& attr) const;
  bool provides_output(const std::string& attr) const;

  bool operator==(const ModelMeta&) const = default;
};

struct SimulatorMeta {
  std::map<std::string, ModelMeta> models;
  std::int64_t step_size = 1;

  bool operator==(const SimulatorMeta&) const = default;
};

struct EntityRecord {
  std::string entity_id;
  std::string model;
  Json extra_info = Json::object();
  bool child = false;

  bool operator==(const EntityRecord&) const = default;
};

struct SenderValue {
  EntityRef sender;
  Json value;

  bool operator==(const SenderValue&) const = default;
};

// entity id -> input attribute -> contributions in delivery order
using StepInputs = std::map<std::string, std::map<std::string, std::vector<SenderValue>>>;
// entity id -> wanted output attributes
using OutputRequest = std::map<std::string, std::vector<std::string>>;
// entity id -> attribute -> value
using OutputData = std::map<std::string, std::map<std::string, Json>>;

// JSON codecs. Decoders throw SimFailure(ProtocolError) on malformed input.
Json to_json(const ModelMeta& m);
Json to_json(const SimulatorMeta& m);
Json to_json(const EntityRecord& r);
Json to_json(const StepInputs& inputs);
Json to_json(const OutputRequest& wanted);
Json to_json(const OutputData& data);

ModelMeta model_meta_from_json(const Json& j);
SimulatorMeta simulator_meta_from_json(const Json& j);
EntityRecord entity_record_from_json(const Json& j);
StepInputs step_inputs_from_json(const Json& j);
OutputRequest output_request_from_json(const Json& j);
OutputData output_data_from_json(const Json& j);

}  // namespace tessellate
