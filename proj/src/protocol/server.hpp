#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "protocol/channel.hpp"
#include "protocol/types.hpp"

namespace tessellate {

// Error a simulator implementation raises; becomes a wire error reply.
class SimFault : public std::runtime_error {
 public:
  SimFault(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Simulator-side implementation behind the wire protocol.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual SimulatorMeta init(const Json& params) = 0;
  // Must return one record per requested id, in order, followed by any
  // child records (flagged child=true).
  virtual std::vector<EntityRecord> create(const std::string& model,
                                           const std::vector<std::string>& ids,
                                           const Json& params) = 0;
  virtual void step(std::int64_t time, const StepInputs& inputs) = 0;
  virtual OutputData get_data(const OutputRequest& wanted) = 0;
  virtual void stop() {}
};

// Runs the message loop until a stop request or channel close. Enforces the
// session state machine (init once, create/step/get_data only after init,
// step times on the declared grid and increasing).
void serve_simulator(LineChannel& channel, Simulator& sim);

}  // namespace tessellate
