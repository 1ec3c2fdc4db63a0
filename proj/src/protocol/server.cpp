#include "protocol/server.hpp"

#include <optional>
#include <set>

#include "protocol/wire.hpp"

namespace tessellate {

namespace {

struct Session {
  Simulator& sim;
  std::optional<SimulatorMeta> meta;
  std::optional<std::int64_t> last_step;
  std::set<std::string> entity_ids;

  Json init(const Json& payload) {
    if (meta) throw SimFault("protocol_error", "simulator already initialized");
    Json params = payload.value("params", Json::object());
    if (!params.is_object()) throw SimFault("protocol_error", "init params must be an object");
    meta = sim.init(params);
    return to_json(*meta);
  }

  Json create(const Json& payload) {
    require_init("create");
    auto model = payload.find("model");
    auto ids = payload.find("ids");
    if (model == payload.end() || !model->is_string() || ids == payload.end() || !ids->is_array())
      throw SimFault("protocol_error", "create needs 'model' and 'ids'");
    std::string model_name = model->get<std::string>();
    if (!meta->models.count(model_name))
      throw SimFault("unknown_model", "unknown model '" + model_name + "'");
    std::vector<std::string> requested;
    std::set<std::string> fresh;
    for (const auto& id : *ids) {
      if (!id.is_string()) throw SimFault("protocol_error", "entity ids must be strings");
      std::string s = id.get<std::string>();
      if (entity_ids.count(s) || !fresh.insert(s).second)
        throw SimFault("duplicate_entity_id", "entity id '" + s + "' already exists");
      requested.push_back(std::move(s));
    }
    Json params = payload.value("params", Json::object());
    if (!params.is_object()) throw SimFault("bad_params", "create params must be an object");
    auto records = sim.create(model_name, requested, params);
    Json out = Json::array();
    for (const auto& r : records) {
      entity_ids.insert(r.entity_id);
      out.push_back(to_json(r));
    }
    return {{"entities", out}};
  }

  Json step(const Json& payload) {
    require_init("step");
    auto t = payload.find("time");
    if (t == payload.end() || !t->is_number_integer()) throw SimFault("protocol_error", "step needs integer 'time'");
    std::int64_t time = t->get<std::int64_t>();
    if (time < 0 || time % meta->step_size != 0)
      throw SimFault("protocol_error", "step time " + std::to_string(time) + " is not a multiple of step size " +
                                           std::to_string(meta->step_size));
    if (last_step && time <= *last_step)
      throw SimFault("protocol_error", "step time " + std::to_string(time) + " does not advance");
    StepInputs inputs;
    try {
      inputs = step_inputs_from_json(payload.value("inputs", Json::object()));
    } catch (const SimFailure& e) {
      throw SimFault("protocol_error", e.what());
    }
    sim.step(time, inputs);
    last_step = time;
    return {{"next_time", time + meta->step_size}};
  }

  Json get_data(const Json& payload) {
    require_init("get_data");
    OutputRequest wanted;
    try {
      wanted = output_request_from_json(payload.value("outputs", Json::object()));
    } catch (const SimFailure& e) {
      throw SimFault("protocol_error", e.what());
    }
    return {{"data", to_json(sim.get_data(wanted))}};
  }

  void require_init(const char* method) const {
    if (!meta) throw SimFault("protocol_error", std::string(method) + " before init");
  }
};

}  // namespace

void serve_simulator(LineChannel& channel, Simulator& sim) {
  Session session{sim, {}, {}, {}};
  while (auto line = channel.receive()) {
    WireMessage msg;
    try {
      msg = decode_message(*line);
    } catch (const SimFailure& e) {
      channel.send(encode_message(WireMessage::error(0, "protocol_error", e.what())));
      continue;
    }
    if (msg.kind != WireMessage::Kind::Request) continue;
    try {
      Json result;
      if (msg.method == "init") result = session.init(msg.payload);
      else if (msg.method == "create") result = session.create(msg.payload);
      else if (msg.method == "step") result = session.step(msg.payload);
      else if (msg.method == "get_data") result = session.get_data(msg.payload);
      else if (msg.method == "stop") {
        sim.stop();
        channel.send(encode_message(WireMessage::response(msg.msg_id, Json::object())));
        break;
      } else {
        throw SimFault("protocol_error", "unknown method '" + msg.method + "'");
      }
      channel.send(encode_message(WireMessage::response(msg.msg_id, std::move(result))));
    } catch (const SimFault& e) {
      channel.send(encode_message(WireMessage::error(msg.msg_id, e.code(), e.what())));
    } catch (const std::exception& e) {
      channel.send(encode_message(WireMessage::error(msg.msg_id, "internal", e.what())));
    }
  }
  channel.close();
}

}  // namespace tessellate
