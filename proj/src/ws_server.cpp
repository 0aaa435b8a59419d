#include "magbike/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

namespace magbike::gateway {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedFrames = 1024;

/// Sessions attached through this server, detached again on stop.
struct Registry {
  std::mutex mutex;
  std::set<SessionId> ids;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, TeleopService& service, Registry& registry)
      : ws_(std::move(socket)), service_(service), registry_(registry) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<Connection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    id_ = service_.attach([weak, executor](const std::string& frame) {
      net::post(executor, [weak, frame] {
        if (auto self = weak.lock()) self->queue(frame);
      });
    });
    attached_ = true;
    {
      std::lock_guard lock(registry_.mutex);
      registry_.ids.insert(id_);
    }
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      shutdown();
      return;
    }
    const std::string frame = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (auto& reply : service_.receive(id_, frame)) queue(std::move(reply));
    read();
  }

  void queue(std::string frame) {
    if (closed_) return;
    if (outbox_.size() >= kMaxQueuedFrames) outbox_.pop_front();
    outbox_.push_back(std::move(frame));
    if (!writing_) write();
  }

  void write() {
    writing_ = true;
    ws_.async_write(net::buffer(outbox_.front()),
                    beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      shutdown();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write();
  }

  void shutdown() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    if (attached_) {
      std::lock_guard lock(registry_.mutex);
      if (registry_.ids.erase(id_)) service_.detach(id_);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  TeleopService& service_;
  Registry& registry_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  SessionId id_{0};
  bool attached_{false};
  bool writing_{false};
  bool closed_{false};
};

}  // namespace

struct WebSocketServer::Impl {
  TeleopService& service;
  net::io_context io;
  tcp::acceptor acceptor;
  std::thread thread;
  Registry registry;

  Impl(TeleopService& s, const std::string& address, std::uint16_t port)
      : service(s), acceptor(io) {
    beast::error_code ec;
    const auto addr = net::ip::make_address(address, ec);
    if (ec) throw std::runtime_error("bad listen address '" + address + "': " + ec.message());
    const tcp::endpoint endpoint(addr, port);
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw std::runtime_error("cannot listen on " + address + ":" + std::to_string(port) + ": " +
                               ec.message());
    }
  }

  void accept() {
    acceptor.async_accept(net::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), service, registry)->start();
      accept();
    });
  }
};

WebSocketServer::WebSocketServer(TeleopService& service, const std::string& address,
                                 std::uint16_t port)
    : impl_(std::make_unique<Impl>(service, address, port)) {}

WebSocketServer::~WebSocketServer() { stop(); }

std::uint16_t WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t WebSocketServer::connections() const {
  std::lock_guard lock(impl_->registry.mutex);
  return impl_->registry.ids.size();
}

void WebSocketServer::start() {
  impl_->accept();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void WebSocketServer::stop() {
  if (!impl_) return;
  net::post(impl_->io, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->io.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  std::lock_guard lock(impl_->registry.mutex);
  for (SessionId id : impl_->registry.ids) impl_->service.detach(id);
  impl_->registry.ids.clear();
}

struct WebSocketClient::Impl {
  net::io_context io;
  websocket::stream<tcp::socket> ws{io};
  std::thread reader;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> inbox;
  bool closed{false};

  void read_loop() {
    beast::flat_buffer buffer;
    for (;;) {
      beast::error_code ec;
      ws.read(buffer, ec);
      std::lock_guard lock(mutex);
      if (ec) {
        closed = true;
        cv.notify_all();
        return;
      }
      inbox.push_back(beast::buffers_to_string(buffer.data()));
      buffer.consume(buffer.size());
      cv.notify_all();
    }
  }
};

WebSocketClient::WebSocketClient(const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->io);
  const auto results = resolver.resolve(host, std::to_string(port));
  net::connect(impl_->ws.next_layer(), results.begin(), results.end());
  impl_->ws.text(true);
  impl_->ws.handshake(host + ":" + std::to_string(port), "/");
  impl_->reader = std::thread([this] { impl_->read_loop(); });
}

WebSocketClient::~WebSocketClient() { close(); }

void WebSocketClient::send(const std::string& frame) { impl_->ws.write(net::buffer(frame)); }

std::optional<std::string> WebSocketClient::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  impl_->cv.wait_for(lock, timeout, [this] { return !impl_->inbox.empty() || impl_->closed; });
  if (impl_->inbox.empty()) return std::nullopt;
  auto frame = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return frame;
}

std::optional<std::string> WebSocketClient::receive_type(const std::string& type,
                                                         std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    auto frame = receive(left);
    if (!frame) return std::nullopt;
    const auto j = nlohmann::json::parse(*frame, nullptr, false);
    if (j.is_object() && j.value("type", "") == type) return frame;
  }
}

void WebSocketClient::close() {
  if (!impl_ || !impl_->reader.joinable()) return;
  beast::error_code ec;
  impl_->ws.next_layer().shutdown(tcp::socket::shutdown_both, ec);
  impl_->ws.next_layer().close(ec);
  impl_->reader.join();
}

}  // namespace magbike::gateway
