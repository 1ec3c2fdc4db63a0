#include "protocol/wire.hpp"

#include "protocol/types.hpp"

namespace tessellate {

WireMessage WireMessage::request(std::uint64_t id, std::string method, nlohmann::json payload) {
  WireMessage m;
  m.msg_id = id;
  m.kind = Kind::Request;
  m.method = std::move(method);
  m.payload = std::move(payload);
  return m;
}

WireMessage WireMessage::response(std::uint64_t id, nlohmann::json result) {
  WireMessage m;
  m.msg_id = id;
  m.kind = Kind::Response;
  m.result = std::move(result);
  return m;
}

WireMessage WireMessage::error(std::uint64_t id, std::string code, std::string message) {
  WireMessage m;
  m.msg_id = id;
  m.kind = Kind::Error;
  m.code = std::move(code);
  m.message = std::move(message);
  return m;
}

std::string encode_message(const WireMessage& m) {
  nlohmann::json j = {{"msg_id", m.msg_id}};
  switch (m.kind) {
    case WireMessage::Kind::Request:
      j["kind"] = "request";
      j["method"] = m.method;
      j["payload"] = m.payload;
      break;
    case WireMessage::Kind::Response:
      j["kind"] = "response";
      j["result"] = m.result;
      break;
    case WireMessage::Kind::Error:
      j["kind"] = "error";
      j["code"] = m.code;
      j["message"] = m.message;
      break;
  }
  return j.dump();
}

namespace {

[[noreturn]] void bad(const std::string& why) {
  throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "bad wire message: " + why);
}

std::string str(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) bad(std::string("'") + key + "' missing or not a string");
  return it->get<std::string>();
}

}  // namespace

WireMessage decode_message(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) bad("not JSON");
  if (!j.is_object()) bad("not an object");
  auto id = j.find("msg_id");
  if (id == j.end() || !id->is_number_unsigned()) bad("'msg_id' missing or not an unsigned integer");
  WireMessage m;
  m.msg_id = id->get<std::uint64_t>();
  std::string kind = str(j, "kind");
  if (kind == "request") {
    m.kind = WireMessage::Kind::Request;
    m.method = str(j, "method");
    if (auto p = j.find("payload"); p != j.end()) {
      if (!p->is_object()) bad("'payload' is not an object");
      m.payload = *p;
    }
  } else if (kind == "response") {
    m.kind = WireMessage::Kind::Response;
    auto r = j.find("result");
    if (r == j.end()) bad("'result' missing");
    m.result = *r;
  } else if (kind == "error") {
    m.kind = WireMessage::Kind::Error;
    m.code = str(j, "code");
    m.message = str(j, "message");
  } else {
    bad("unknown kind '" + kind + "'");
  }
  return m;
}

}  // namespace tessellate
