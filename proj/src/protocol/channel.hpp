#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

namespace tessellate {

// Bidirectional stream of text lines. send() may be called from any thread;
// receive() from one reader at a time. close() unblocks a pending receive().
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual bool send(const std::string& line) = 0;
  virtual std::optional<std::string> receive() = 0;  // nullopt once closed and drained
  virtual void close() = 0;
};

// In-process queue pair used by builtin simulators.
std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> make_loopback_pair();

// Line channel over a connected stream socket; takes ownership of `fd`.
std::unique_ptr<LineChannel> make_socket_channel(int fd);

// Listening socket bound to 127.0.0.1 on an ephemeral port.
class LocalListener {
 public:
  LocalListener();
  ~LocalListener();
  LocalListener(const LocalListener&) = delete;
  LocalListener& operator=(const LocalListener&) = delete;

  int port() const { return port_; }
  // Returns a connected fd, or -1 when `timeout` elapses first.
  int accept_for(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  int port_ = 0;
};

// Connects to 127.0.0.1:port; returns -1 on failure.
int connect_local(int port);

}  // namespace tessellate
