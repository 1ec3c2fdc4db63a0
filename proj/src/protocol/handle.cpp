#include "protocol/handle.hpp"

namespace tessellate {

SimulatorHandle::SimulatorHandle(std::string instance_id, std::unique_ptr<LineChannel> channel,
                                 std::unique_ptr<Peer> peer, std::chrono::milliseconds stop_grace,
                                 std::chrono::milliseconds request_timeout)
    : instance_id_(std::move(instance_id)),
      channel_(std::move(channel)),
      peer_(std::move(peer)),
      stop_grace_(stop_grace),
      request_timeout_(request_timeout) {
  reader_ = std::thread([this] { read_loop(); });
}

SimulatorHandle::~SimulatorHandle() {
  stop();
}

void SimulatorHandle::read_loop() {
  while (auto line = channel_->receive()) {
    WireMessage msg;
    try {
      msg = decode_message(*line);
    } catch (const SimFailure&) {
      ++unmatched_;
      continue;
    }
    std::lock_guard lock(mu_);
    auto it = pending_.find(msg.msg_id);
    if (msg.kind == WireMessage::Kind::Request || it == pending_.end()) {
      ++unmatched_;
      continue;
    }
    it->second.set_value(std::move(msg));
    pending_.erase(it);
  }
  fail_pending("connection to simulator '" + instance_id_ + "' closed");
}

void SimulatorHandle::fail_pending(const std::string& why) {
  std::lock_guard lock(mu_);
  closed_ = true;
  for (auto& [id, promise] : pending_)
    promise.set_exception(std::make_exception_ptr(
        SimFailure(SimFailure::Kind::TransportClosed, "transport_closed", why)));
  pending_.clear();
}

std::future<WireMessage> SimulatorHandle::send_request(const std::string& method, Json payload) {
  std::future<WireMessage> fut;
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    if (closed_ || stopped_)
      throw SimFailure(SimFailure::Kind::TransportClosed, "transport_closed",
                       "simulator '" + instance_id_ + "' is not connected");
    id = next_id_++;
    fut = pending_[id].get_future();
  }
  if (!channel_->send(encode_message(WireMessage::request(id, method, std::move(payload))))) {
    std::lock_guard lock(mu_);
    pending_.erase(id);
    throw SimFailure(SimFailure::Kind::TransportClosed, "transport_closed",
                     "could not send to simulator '" + instance_id_ + "'");
  }
  return fut;
}

Json SimulatorHandle::call(const std::string& method, Json payload) {
  auto fut = send_request(method, std::move(payload));
  if (fut.wait_for(request_timeout_) != std::future_status::ready)
    throw SimFailure(SimFailure::Kind::ProtocolError, "timeout",
                     "simulator '" + instance_id_ + "' did not answer '" + method + "'");
  WireMessage reply = fut.get();
  if (reply.kind == WireMessage::Kind::Error) {
    auto kind = reply.code == "protocol_error" ? SimFailure::Kind::ProtocolError : SimFailure::Kind::SimError;
    throw SimFailure(kind, reply.code, reply.message);
  }
  return std::move(reply.result);
}

SimulatorMeta SimulatorHandle::init(const Json& init_params) {
  Json result = call("init", {{"params", init_params}});
  meta_ = simulator_meta_from_json(result);
  return *meta_;
}

std::vector<EntityRecord> SimulatorHandle::create(const std::string& model,
                                                  const std::vector<std::string>& requested_ids,
                                                  const Json& create_params) {
  Json result = call("create", {{"model", model}, {"ids", requested_ids}, {"params", create_params}});
  auto it = result.find("entities");
  if (it == result.end() || !it->is_array())
    throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "create reply lacks 'entities'");
  std::vector<EntityRecord> records;
  for (const auto& r : *it) records.push_back(entity_record_from_json(r));
  // Requested entities come first, in request order; children follow.
  if (records.size() < requested_ids.size())
    throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "create reply is missing entities");
  for (std::size_t i = 0; i < requested_ids.size(); ++i)
    if (records[i].entity_id != requested_ids[i] || records[i].child)
      throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error",
                       "create reply does not echo requested id '" + requested_ids[i] + "'");
  for (std::size_t i = requested_ids.size(); i < records.size(); ++i)
    if (!records[i].child)
      throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error",
                       "unrequested entity '" + records[i].entity_id + "' not flagged as child");
  return records;
}

std::int64_t SimulatorHandle::step(std::int64_t time, const StepInputs& inputs) {
  Json result = call("step", {{"time", time}, {"inputs", to_json(inputs)}});
  auto it = result.find("next_time");
  if (it == result.end() || !it->is_number_integer())
    throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "step reply lacks 'next_time'");
  return it->get<std::int64_t>();
}

OutputData SimulatorHandle::get_data(const OutputRequest& wanted) {
  Json result = call("get_data", {{"outputs", to_json(wanted)}});
  auto it = result.find("data");
  if (it == result.end())
    throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error", "get_data reply lacks 'data'");
  OutputData data = output_data_from_json(*it);
  for (const auto& [eid, attrs] : wanted)
    for (const auto& attr : attrs)
      if (!data.count(eid) || !data[eid].count(attr))
        throw SimFailure(SimFailure::Kind::ProtocolError, "protocol_error",
                         "get_data reply lacks " + eid + "." + attr);
  return data;
}

void SimulatorHandle::stop() {
  if (stopped_.exchange(true)) return;
  auto deadline = std::chrono::steady_clock::now() + stop_grace_;
  std::optional<std::future<WireMessage>> ack;
  {
    std::lock_guard lock(mu_);
    if (!closed_) {
      std::uint64_t id = next_id_++;
      ack = pending_[id].get_future();
      if (!channel_->send(encode_message(WireMessage::request(id, "stop", Json::object())))) {
        pending_.erase(id);
        ack.reset();
      }
    }
  }
  if (ack) ack->wait_until(deadline);
  channel_->close();
  if (peer_ && !peer_->wait_exit(deadline)) peer_->kill();
  if (reader_.joinable()) reader_.join();
}

}  // namespace tessellate
