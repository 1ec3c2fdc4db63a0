#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "gateway/session.hpp"

namespace tessellate {

// Websocket front end for a Session: text frames carrying JSON requests,
// replies and notifications. Runs its own I/O thread.
class GatewayServer {
 public:
  // Binds immediately; port 0 picks a free one. Throws std::runtime_error
  // when the address is unavailable.
  GatewayServer(Session& session, const std::string& host, std::uint16_t port);
  ~GatewayServer();

  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  std::uint16_t port() const;
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tessellate
