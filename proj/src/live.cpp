#include "mixtwin/live.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace mixtwin {

struct LiveServer::Conn {
  int fd = -1;
  Simulation::ClientId client = 0;
  std::string in;
  std::string out;
  bool open = true;
};

Endpoint parse_endpoint(const std::string& text) {
  Endpoint e;
  std::string port = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    e.host = text.substr(0, colon);
    port = text.substr(colon + 1);
    if (e.host.empty()) e.host = "127.0.0.1";
  }
  if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5) {
    throw std::invalid_argument("bad listen endpoint '" + text + "'");
  }
  const int p = std::stoi(port);
  if (p > 65535) throw std::invalid_argument("port out of range in '" + text + "'");
  e.port = static_cast<std::uint16_t>(p);
  return e;
}

std::string to_string(const Endpoint& e) { return e.host + ":" + std::to_string(e.port); }

LiveServer::LiveServer(Simulation& sim, const Endpoint& endpoint) : sim_(sim) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(endpoint.port);
  const std::string host = endpoint.host == "localhost" ? "127.0.0.1" : endpoint.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("listen host must be an IPv4 address: " + endpoint.host);
  }
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 8) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on " + to_string(endpoint) + ": " + err);
  }
  ::fcntl(listen_fd_, F_SETFL, O_NONBLOCK);
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LiveServer::~LiveServer() {
  for (auto& c : conns_) close_conn(*c);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::size_t LiveServer::connections() const {
  std::size_t n = 0;
  for (const auto& c : conns_) n += c->open;
  return n;
}

void LiveServer::close_conn(Conn& c) {
  if (!c.open) return;
  c.open = false;
  sim_.disconnect_client(c.client);
  ::close(c.fd);
}

void LiveServer::accept_pending() {
  for (;;) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;
    ::fcntl(fd, F_SETFL, O_NONBLOCK);
    auto conn = std::make_unique<Conn>();
    conn->fd = fd;
    Conn* raw = conn.get();
    conn->client = sim_.connect_client([raw](const std::string& line) {
      if (raw->open) raw->out += line + "\n";
    });
    conns_.push_back(std::move(conn));
  }
}

void LiveServer::poll_io(int timeout_ms) {
  std::vector<pollfd> fds;
  fds.push_back({listen_fd_, POLLIN, 0});
  for (const auto& c : conns_) {
    if (c->open) fds.push_back({c->fd, static_cast<short>(POLLIN | (c->out.empty() ? 0 : POLLOUT)), 0});
  }
  if (::poll(fds.data(), fds.size(), timeout_ms) <= 0) return;
  if (fds[0].revents & POLLIN) accept_pending();

  std::size_t k = 1;
  for (auto& c : conns_) {
    if (!c->open) continue;
    const short ev = fds[k++].revents;
    if (ev & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      const ssize_t n = ::recv(c->fd, buf, sizeof buf, 0);
      if (n <= 0) {
        if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) close_conn(*c);
        continue;
      }
      c->in.append(buf, static_cast<std::size_t>(n));
      for (std::size_t nl; (nl = c->in.find('\n')) != std::string::npos;) {
        std::string line = c->in.substr(0, nl);
        c->in.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) sim_.client_send(c->client, std::move(line));
      }
    }
    if ((ev & POLLOUT) && !c->out.empty()) {
      const ssize_t n = ::send(c->fd, c->out.data(), c->out.size(), MSG_NOSIGNAL);
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
        close_conn(*c);
        continue;
      }
      if (n > 0) c->out.erase(0, static_cast<std::size_t>(n));
    }
  }
}

void LiveServer::run(double time_scale) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const double tick = sim_.config().tick;
  while (!sim_.done()) {
    sim_.step();
    const auto deadline =
        start + std::chrono::duration_cast<clock::duration>(
                    std::chrono::duration<double>(static_cast<double>(sim_.tick_index()) * tick / time_scale));
    do {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      poll_io(static_cast<int>(std::max<long long>(0, left)));
    } while (clock::now() < deadline);
  }
  // Give consoles the tail of the stream.
  for (int i = 0; i < 10; ++i) poll_io(10);
}

}  // namespace mixtwin
