#include "protocol/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <stdexcept>

namespace tessellate {

namespace {

struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> items;
  bool closed = false;
};

struct Link {
  Queue a_to_b;
  Queue b_to_a;

  void close_all() {
    for (Queue* q : {&a_to_b, &b_to_a}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }
};

class LoopbackChannel final : public LineChannel {
 public:
  LoopbackChannel(std::shared_ptr<Link> link, Queue& out, Queue& in)
      : link_(std::move(link)), out_(out), in_(in) {}
  ~LoopbackChannel() override { close(); }

  bool send(const std::string& line) override {
    std::lock_guard lock(out_.mu);
    if (out_.closed) return false;
    out_.items.push_back(line);
    out_.cv.notify_one();
    return true;
  }

  std::optional<std::string> receive() override {
    std::unique_lock lock(in_.mu);
    in_.cv.wait(lock, [&] { return !in_.items.empty() || in_.closed; });
    if (in_.items.empty()) return std::nullopt;
    std::string line = std::move(in_.items.front());
    in_.items.pop_front();
    return line;
  }

  void close() override { link_->close_all(); }

 private:
  std::shared_ptr<Link> link_;
  Queue& out_;
  Queue& in_;
};

class SocketChannel final : public LineChannel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override {
    close();
    ::close(fd_);
  }

  bool send(const std::string& line) override {
    std::lock_guard lock(send_mu_);
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    return true;
  }

  std::optional<std::string> receive() override {
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      char chunk[4096];
      ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  int fd_;
  std::mutex send_mu_;
  std::string buffer_;
};

}  // namespace

std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> make_loopback_pair() {
  auto link = std::make_shared<Link>();
  auto a = std::make_unique<LoopbackChannel>(link, link->a_to_b, link->b_to_a);
  auto b = std::make_unique<LoopbackChannel>(link, link->b_to_a, link->a_to_b);
  return {std::move(a), std::move(b)};
}

std::unique_ptr<LineChannel> make_socket_channel(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<SocketChannel>(fd);
}

LocalListener::LocalListener() {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 4) < 0) {
    int err = errno;
    ::close(fd_);
    throw std::runtime_error(std::string("bind/listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LocalListener::~LocalListener() {
  if (fd_ >= 0) ::close(fd_);
}

int LocalListener::accept_for(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  int rc;
  do {
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  } while (rc < 0 && errno == EINTR);
  if (rc <= 0) return -1;
  return ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
}

int connect_local(int port) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

}  // namespace tessellate
