#include "gateway/ws_server.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace tessellate {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session& session) : ws_(std::move(socket)), session_(session) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  // Safe from any thread.
  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      self->queue_.push_back(std::move(text));
      if (self->queue_.size() == 1) self->do_write();
    });
  }

  // I/O thread only.
  void shut() {
    detach();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  void detach() {
    if (token_) session_.unsubscribe(*token_);
    token_.reset();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<Connection> weak = shared_from_this();
    token_ = session_.subscribe([weak](const std::string& m) {
      if (auto self = weak.lock()) self->send(m);
    });
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      detach();
      return;
    }
    Json request = Json::parse(beast::buffers_to_string(buffer_.data()), nullptr, false);
    buffer_.consume(buffer_.size());
    if (request.is_discarded()) {
      send(Json{{"req_id", nullptr}, {"ok", false}, {"error", "InvalidRequest"}, {"message", "malformed JSON"}}.dump());
    } else {
      std::weak_ptr<Connection> weak = shared_from_this();
      session_.submit(std::move(request), [weak](Json reply) {
        if (auto self = weak.lock()) self->send(reply.dump());
      });
    }
    do_read();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      queue_.clear();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Session& session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::optional<std::uint64_t> token_;
};

}  // namespace

struct GatewayServer::Impl {
  Session& session;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::vector<std::weak_ptr<Connection>> connections;
  std::thread thread;
  std::uint16_t port = 0;

  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  bool finished = false;

  explicit Impl(Session& s) : session(s) {}

  void do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(std::move(socket), session);
      connections.push_back(c);
      c->start();
      do_accept();
    });
  }
};

GatewayServer::GatewayServer(Session& session, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>(session)) {
  try {
    tcp::endpoint ep(net::ip::make_address(host), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
    impl_->port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + e.code().message());
  }
  impl_->do_accept();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

GatewayServer::~GatewayServer() { stop(); }

std::uint16_t GatewayServer::port() const { return impl_->port; }

void GatewayServer::stop() {
  {
    std::unique_lock lk(impl_->mu);
    if (impl_->stopping) {
      impl_->cv.wait(lk, [&] { return impl_->finished; });
      return;
    }
    impl_->stopping = true;
  }
  std::promise<void> closed;
  net::post(impl_->ioc, [&] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (auto& weak : impl_->connections)
      if (auto c = weak.lock()) c->shut();
    closed.set_value();
  });
  closed.get_future().wait();
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  {
    std::lock_guard lk(impl_->mu);
    impl_->finished = true;
  }
  impl_->cv.notify_all();
}

void GatewayServer::wait() {
  std::unique_lock lk(impl_->mu);
  impl_->cv.wait(lk, [&] { return impl_->finished; });
}

}  // namespace tessellate
