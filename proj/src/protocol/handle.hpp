#pragma once

#include <atomic>
#include <chrono>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "protocol/channel.hpp"
#include "protocol/types.hpp"
#include "protocol/wire.hpp"

namespace tessellate {

// The process or thread on the far side of a handle's channel.
class Peer {
 public:
  virtual ~Peer() = default;
  // True once the peer has exited; waits until `deadline` at most.
  virtual bool wait_exit(std::chrono::steady_clock::time_point deadline) = 0;
  virtual void kill() = 0;
};

inline constexpr std::chrono::milliseconds kDefaultStopGrace{5000};
inline constexpr std::chrono::milliseconds kDefaultRequestTimeout{60000};

// Orchestrator-side client of one simulator instance. A background reader
// matches replies to outstanding requests by msg_id, so replies may arrive in
// any order. Owned by one controller at a time.
class SimulatorHandle {
 public:
  SimulatorHandle(std::string instance_id, std::unique_ptr<LineChannel> channel,
                  std::unique_ptr<Peer> peer,
                  std::chrono::milliseconds stop_grace = kDefaultStopGrace,
                  std::chrono::milliseconds request_timeout = kDefaultRequestTimeout);
  ~SimulatorHandle();

  SimulatorHandle(const SimulatorHandle&) = delete;
  SimulatorHandle& operator=(const SimulatorHandle&) = delete;

  const std::string& instance_id() const { return instance_id_; }

  SimulatorMeta init(const Json& init_params);
  std::vector<EntityRecord> create(const std::string& model, const std::vector<std::string>& requested_ids,
                                   const Json& create_params);
  std::int64_t step(std::int64_t time, const StepInputs& inputs);
  OutputData get_data(const OutputRequest& wanted);

  // Best effort: asks the simulator to exit, then kills it once the grace
  // period is over. Idempotent.
  void stop();

  bool stopped() const { return stopped_; }
  const std::optional<SimulatorMeta>& meta() const { return meta_; }

  // Low-level request. The future yields the response or error message.
  std::future<WireMessage> send_request(const std::string& method, Json payload);
  // Sends and waits; returns `result` or throws SimFailure.
  Json call(const std::string& method, Json payload);

  std::size_t unmatched_replies() const { return unmatched_; }

 private:
  void read_loop();
  void fail_pending(const std::string& why);

  std::string instance_id_;
  std::unique_ptr<LineChannel> channel_;
  std::unique_ptr<Peer> peer_;
  std::chrono::milliseconds stop_grace_;
  std::chrono::milliseconds request_timeout_;

  std::mutex mu_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, std::promise<WireMessage>> pending_;
  bool closed_ = false;
  std::atomic<std::size_t> unmatched_{0};

  std::optional<SimulatorMeta> meta_;
  std::atomic<bool> stopped_{false};
  std::thread reader_;
};

}  // namespace tessellate
