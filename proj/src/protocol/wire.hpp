#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace tessellate {

// One newline-delimited JSON message between orchestrator and simulator.
//
//   request  {"msg_id":n,"kind":"request","method":"...","payload":{...}}
//   response {"msg_id":n,"kind":"response","result":{...}}
//   error    {"msg_id":n,"kind":"error","code":"...","message":"..."}
struct WireMessage {
  enum class Kind { Request, Response, Error };

  std::uint64_t msg_id = 0;
  Kind kind = Kind::Request;
  std::string method;                            // requests
  nlohmann::json payload = nlohmann::json::object();  // requests
  nlohmann::json result = nlohmann::json::object();   // responses
  std::string code;                              // errors
  std::string message;                           // errors

  static WireMessage request(std::uint64_t id, std::string method, nlohmann::json payload);
  static WireMessage response(std::uint64_t id, nlohmann::json result);
  static WireMessage error(std::uint64_t id, std::string code, std::string message);

  bool operator==(const WireMessage&) const = default;
};

// Single line, no trailing newline.
std::string encode_message(const WireMessage& m);
// Throws SimFailure(ProtocolError) on anything that is not a well-formed message.
WireMessage decode_message(std::string_view line);

}  // namespace tessellate
