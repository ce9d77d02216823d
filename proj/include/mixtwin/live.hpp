#pragma once

#include <cstdint>
#include <string>

#include "mixtwin/engine.hpp"

namespace mixtwin {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
};

/// Parses "host:port" or a bare port. Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);
std::string to_string(const Endpoint& e);

/// Serves operator consoles over TCP while a simulation runs in real time.
/// Each connection is one newline-delimited frame stream, mapped to a
/// Simulation client; frames are folded in at tick boundaries.
class LiveServer {
 public:
  LiveServer(Simulation& sim, const Endpoint& endpoint);
  ~LiveServer();
  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  std::uint16_t port() const { return port_; }

  // Steps the simulation to completion, pacing ticks against the wall clock.
  // `time_scale` > 1 runs faster than real time.
  void run(double time_scale = 1.0);
  // One non-blocking I/O pass: accept, read, write.
  void poll_io(int timeout_ms);
  std::size_t connections() const;

 private:
  struct Conn;
  void accept_pending();
  void close_conn(Conn& c);

  Simulation& sim_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::vector<std::unique_ptr<Conn>> conns_;
};

}  // namespace mixtwin
