#include "protocol/types.hpp"

#include <algorithm>
#include <set>

namespace tessellate {

const char* to_string(SimFailure::Kind kind) {
  switch (kind) {
    case SimFailure::Kind::SpawnFailed: return "SpawnFailed";
    case SimFailure::Kind::ConnectTimeout: return "ConnectTimeout";
    case SimFailure::Kind::SimError: return "SimError";
    case SimFailure::Kind::ProtocolError: return "ProtocolError";
    case SimFailure::Kind::TransportClosed: return "TransportClosed";
  }
  return "?";
}

bool ModelMeta::accepts_input(const std::string& attr) const {
  return std::find(inputs.begin(), inputs.end(), attr) != inputs.end() ||
         std::find(inputs.begin(), inputs.end(), "*") != inputs.end();
}

bool ModelMeta::provides_output(const std::string& attr) const {
  return std::find(outputs.begin(), outputs.end(), attr) != outputs.end();
}

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "malformed " + what);
}

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) malformed(what);
  auto it = j.find(key);
  if (it == j.end()) malformed(what + " (missing '" + key + "')");
  return *it;
}

std::string string_field(const Json& j, const char* key, const std::string& what) {
  const Json& v = field(j, key, what);
  if (!v.is_string()) malformed(what + " ('" + key + "' is not a string)");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const Json& j, const std::string& what) {
  if (!j.is_array()) malformed(what);
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) malformed(what);
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Json to_json(const ModelMeta& m) {
  Json params = Json::array();
  for (const auto& p : m.create_params) {
    Json d = {{"name", p.name}, {"type", p.type}, {"doc", p.doc}};
    if (p.allowed) d["allowed"] = *p.allowed;
    if (p.unit) d["unit"] = *p.unit;
    params.push_back(std::move(d));
  }
  return {{"create_params", params}, {"inputs", m.inputs}, {"outputs", m.outputs}};
}

Json to_json(const SimulatorMeta& m) {
  Json models = Json::object();
  for (const auto& [name, mm] : m.models) models[name] = to_json(mm);
  return {{"models", models}, {"step_size", m.step_size}};
}

Json to_json(const EntityRecord& r) {
  Json j = {{"entity_id", r.entity_id}, {"model", r.model}, {"extra_info", r.extra_info}};
  if (r.child) j["child"] = true;
  return j;
}

Json to_json(const StepInputs& inputs) {
  Json j = Json::object();
  for (const auto& [eid, attrs] : inputs) {
    Json a = Json::object();
    for (const auto& [attr, values] : attrs) {
      Json list = Json::array();
      for (const auto& sv : values)
        list.push_back({{"sender", {{"sim", sv.sender.simulator_id}, {"entity", sv.sender.entity_id}}},
                        {"value", sv.value}});
      a[attr] = std::move(list);
    }
    j[eid] = std::move(a);
  }
  return j;
}

Json to_json(const OutputRequest& wanted) {
  Json j = Json::object();
  for (const auto& [eid, attrs] : wanted) j[eid] = attrs;
  return j;
}

Json to_json(const OutputData& data) {
  Json j = Json::object();
  for (const auto& [eid, attrs] : data) {
    Json a = Json::object();
    for (const auto& [attr, v] : attrs) a[attr] = v;
    j[eid] = std::move(a);
  }
  return j;
}

ModelMeta model_meta_from_json(const Json& j) {
  ModelMeta m;
  const Json& params = field(j, "create_params", "model meta");
  if (!params.is_array()) malformed("model meta create_params");
  for (const auto& p : params) {
    ParamDescriptor d;
    d.name = string_field(p, "name", "param descriptor");
    d.type = string_field(p, "type", "param descriptor");
    if (p.contains("doc")) d.doc = string_field(p, "doc", "param descriptor");
    if (p.contains("unit")) d.unit = string_field(p, "unit", "param descriptor");
    if (p.contains("allowed")) {
      if (!p["allowed"].is_array()) malformed("param descriptor allowed values");
      d.allowed = p["allowed"].get<std::vector<Json>>();
    }
    m.create_params.push_back(std::move(d));
  }
  m.inputs = string_list(field(j, "inputs", "model meta"), "model meta inputs");
  m.outputs = string_list(field(j, "outputs", "model meta"), "model meta outputs");
  for (const auto* list : {&m.inputs, &m.outputs}) {
    std::set<std::string> unique(list->begin(), list->end());
    if (unique.size() != list->size()) malformed("model meta (duplicate attribute names)");
  }
  return m;
}

SimulatorMeta simulator_meta_from_json(const Json& j) {
  SimulatorMeta m;
  const Json& models = field(j, "models", "simulator meta");
  if (!models.is_object() || models.empty()) malformed("simulator meta (needs at least one model)");
  for (const auto& [name, mm] : models.items()) m.models.emplace(name, model_meta_from_json(mm));
  const Json& step = field(j, "step_size", "simulator meta");
  if (!step.is_number_integer() || step.get<std::int64_t>() < 1) malformed("simulator meta step_size");
  m.step_size = step.get<std::int64_t>();
  return m;
}

EntityRecord entity_record_from_json(const Json& j) {
  EntityRecord r;
  r.entity_id = string_field(j, "entity_id", "entity record");
  r.model = string_field(j, "model", "entity record");
  if (j.contains("extra_info")) {
    if (!j["extra_info"].is_object()) malformed("entity record extra_info");
    for (const auto& [k, v] : j["extra_info"].items())
      if (!v.is_primitive()) malformed("entity record extra_info (non-scalar value)");
    r.extra_info = j["extra_info"];
  }
  if (j.contains("child")) {
    if (!j["child"].is_boolean()) malformed("entity record child flag");
    r.child = j["child"].get<bool>();
  }
  return r;
}

StepInputs step_inputs_from_json(const Json& j) {
  if (!j.is_object()) malformed("step inputs");
  StepInputs out;
  for (const auto& [eid, attrs] : j.items()) {
    if (!attrs.is_object()) malformed("step inputs");
    auto& slot = out[eid];
    for (const auto& [attr, list] : attrs.items()) {
      if (!list.is_array()) malformed("step inputs");
      auto& values = slot[attr];
      for (const auto& sv : list) {
        const Json& sender = field(sv, "sender", "step input");
        values.push_back({EntityRef{string_field(sender, "sim", "sender"), string_field(sender, "entity", "sender")},
                          field(sv, "value", "step input")});
      }
    }
  }
  return out;
}

OutputRequest output_request_from_json(const Json& j) {
  if (!j.is_object()) malformed("output request");
  OutputRequest out;
  for (const auto& [eid, attrs] : j.items()) out[eid] = string_list(attrs, "output request");
  return out;
}

OutputData output_data_from_json(const Json& j) {
  if (!j.is_object()) malformed("output data");
  OutputData out;
  for (const auto& [eid, attrs] : j.items()) {
    if (!attrs.is_object()) malformed("output data");
    auto& slot = out[eid];
    for (const auto& [attr, v] : attrs.items()) slot[attr] = v;
  }
  return out;
}

}  // namespace tessellate
