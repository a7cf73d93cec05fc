#pragma once

#include "protocol.hpp"

#include <boost/asio.hpp>

#include <atomic>
#include <optional>
#include <thread>

namespace imv {

namespace net {
using boost::asio::ip::tcp;

inline auto read_message(tcp::socket &sock) -> std::optional<Json> {
  std::array<std::uint8_t, 4> head{};
  boost::system::error_code ec;
  boost::asio::read(sock, boost::asio::buffer(head), ec);
  if (ec == boost::asio::error::eof) {
    return std::nullopt;
  }
  verify(!ec, Errc::protocol, "read failed: " + ec.message());
  const auto n = detail::read_be32(head, 0);
  verify(n <= max_message_bytes, Errc::protocol, "message too large");
  std::vector<std::uint8_t> body(n);
  boost::asio::read(sock, boost::asio::buffer(body), ec);
  verify(!ec, Errc::protocol, "truncated message: " + ec.message());
  return parse_message(body);
}

inline void write_message(tcp::socket &sock, const Json &msg) {
  const auto bytes = frame_message(msg);
  boost::system::error_code ec;
  boost::asio::write(sock, boost::asio::buffer(bytes), ec);
  verify(!ec, Errc::protocol, "write failed: " + ec.message());
}

inline auto parse_endpoint(const std::string &text) -> std::pair<std::string, unsigned short> {
  const auto colon = text.rfind(':');
  verify(colon != std::string::npos, Errc::invalid_state, "endpoint must be host:port");
  const int port = std::stoi(text.substr(colon + 1));
  verify(port >= 0 && port <= 65535, Errc::invalid_state, "port out of range");
  return {text.substr(0, colon), static_cast<unsigned short>(port)};
}
} // namespace net

// Blocking TCP service, one thread per connection, one session per connection.
class Server {
public:
  Server(const Store &store, ServiceConfig sc, const std::string &host, unsigned short port)
      : store_(store), sc_(std::move(sc)),
        acceptor_(io_, net::tcp::endpoint(boost::asio::ip::make_address(host), port)) {
    check_store_config(store_, sc_.session);
  }

  ~Server() { stop(); }
  Server(const Server &) = delete;
  auto operator=(const Server &) -> Server & = delete;

  [[nodiscard]] auto port() const { return acceptor_.local_endpoint().port(); }

  // Accepts until stop() is called.
  void run() {
    while (!stopping_) {
      net::tcp::socket sock(io_);
      boost::system::error_code ec;
      acceptor_.accept(sock, ec);
      if (ec || stopping_) {
        break;
      }
      std::lock_guard lock(mutex_);
      workers_.emplace_back([this, s = std::move(sock)]() mutable { serve(std::move(s)); });
    }
    boost::system::error_code ec;
    acceptor_.close(ec);
    std::lock_guard lock(mutex_);
    for (auto &w : workers_) {
      if (w.joinable()) {
        w.join();
      }
    }
    workers_.clear();
  }

  // Async-signal-safe: only raises the flag. A signal installed without
  // SA_RESTART then breaks accept() with EINTR.
  void request_stop() noexcept { stopping_ = true; }

  // A blocking accept() is not woken by closing the acceptor from another
  // thread, so poke it with a throwaway connection instead.
  void stop() {
    if (stopping_.exchange(true)) {
      return;
    }
    boost::system::error_code ec;
    boost::asio::io_context io;
    net::tcp::socket poke(io);
    auto ep = acceptor_.local_endpoint(ec);
    if (ec) {
      return;
    }
    if (ep.address().is_unspecified()) {
      ep.address(boost::asio::ip::make_address(ep.address().is_v6() ? "::1" : "127.0.0.1"));
    }
    poke.connect(ep, ec);
  }

private:
  void serve(net::tcp::socket sock) {
    SessionEndpoint ep(store_, sc_);
    try {
      while (auto msg = net::read_message(sock)) {
        for (const auto &reply : ep.on_message(*msg)) {
          net::write_message(sock, reply);
        }
      }
    } catch (const Error &e) {
      try {
        net::write_message(sock, error_message(errc_name(e.code()), e.what()));
      } catch (const Error &) {
      }
    }
  }

  const Store &store_;
  ServiceConfig sc_;
  boost::asio::io_context io_;
  net::tcp::acceptor acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::vector<std::thread> workers_;
};

struct ClientReport {
  Json hello;
  std::vector<std::uint64_t> bundle_bits;
  std::uint64_t ref_bits{};
  std::uint64_t depth_bits{};
  std::uint64_t eframe_bits{};
  std::vector<FrameStat> frames;

  [[nodiscard]] auto total_bits() const { return ref_bits + depth_bits + eframe_bits; }
};

// Scripted client: replays `path` (join, then one request every N_T frames).
// With a store at hand it also decodes each window and acknowledges PSNR.
inline auto run_socket_client(const std::string &host, unsigned short port, const std::vector<FrameId> &path,
                              int start_prev, const Store *store = nullptr) -> ClientReport {
  boost::asio::io_context io;
  net::tcp::socket sock(io);
  boost::system::error_code ec;
  sock.connect(net::tcp::endpoint(boost::asio::ip::make_address(host), port), ec);
  verify(!ec, Errc::protocol, "connect failed: " + ec.message());

  auto expect = [&](const char *type) {
    auto m = net::read_message(sock);
    verify(m.has_value(), Errc::protocol, "connection closed");
    if ((*m)["type"] == "ERROR") {
      throw Error(Errc::protocol, (*m).value("code", "") + ": " + (*m).value("detail", ""));
    }
    verify((*m)["type"] == type, Errc::protocol, std::string("expected ") + type);
    return *m;
  };

  ClientReport rep;
  net::write_message(sock, {{"type", "HELLO"}});
  rep.hello = expect("HELLO");
  const auto &c = rep.hello.at("config");
  SessionConfig cfg;
  cfg.n_t = c.at("n_t").get<int>();
  cfg.n_d = c.at("n_d").get<int>();
  cfg.block_size = c.at("block_size").get<int>();
  cfg.gop.gop_size = c.at("gop_size").get<int>();
  cfg.n_refs = c.at("n_refs").get<int>();
  cfg.ladder.steps = c.at("ladder").get<std::vector<int>>();
  cfg.ref_q = c.at("ref_q").get<int>();

  ClientState cs;
  cs.nav = {path.front(), start_prev};
  auto exchange = [&](const Request &req) {
    net::write_message(sock, request_message(req));
    const auto b = bundle_from_json(expect("BUNDLE"), cfg.ladder);
    rep.bundle_bits.push_back(b.total_bits());
    rep.ref_bits += b.ref_bits;
    rep.depth_bits += b.depth_bits;
    rep.eframe_bits += b.eframe_bits;
    if (store != nullptr) {
      const auto before = cs.stats.frames.size();
      client_step(cs, b, window_positions(path, b.window), *store, cfg);
      for (auto i = before; i < cs.stats.frames.size(); ++i) {
        net::write_message(sock, frame_ack_message(cs.stats.frames[i]));
      }
    }
  };
  exchange({0, {path.front(), start_prev}, true});
  for (const int t0 : request_times(cfg, static_cast<int>(path.size()))) {
    exchange({t0, nav_at(path, t0, start_prev), false});
  }
  rep.frames = cs.stats.frames;
  sock.shutdown(net::tcp::socket::shutdown_both, ec);
  return rep;
}

} // namespace imv
