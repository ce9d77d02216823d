#include <doctest.h>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <string>
#include <vector>

#include "mixtwin/live.hpp"

using namespace mixtwin;
using nlohmann::json;

namespace {

class TestClient {
 public:
  explicit TestClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    ::fcntl(fd_, F_SETFL, ::fcntl(fd_, F_GETFL) | O_NONBLOCK);
  }
  ~TestClient() { close(); }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  void send_line(const std::string& line) {
    const std::string data = line + "\n";
    REQUIRE(::send(fd_, data.data(), data.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(data.size()));
  }
  std::vector<json> read_frames() {
    char buf[65536];
    for (;;) {
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) break;
      pending_.append(buf, static_cast<std::size_t>(n));
    }
    std::vector<json> out;
    for (std::size_t nl; (nl = pending_.find('\n')) != std::string::npos;) {
      out.push_back(json::parse(pending_.substr(0, nl)));
      pending_.erase(0, nl + 1);
    }
    return out;
  }

 private:
  int fd_ = -1;
  std::string pending_;
};

ScenarioConfig short_run(double duration) {
  auto cfg = default_scenario();
  cfg.duration = duration;
  return cfg;
}

}  // namespace

TEST_SUITE("live") {

TEST_CASE("endpoint parsing") {
  CHECK(parse_endpoint("7070").port == 7070);
  CHECK(parse_endpoint("7070").host == "127.0.0.1");
  const auto e = parse_endpoint("0.0.0.0:9000");
  CHECK(e.host == "0.0.0.0");
  CHECK(e.port == 9000);
  CHECK(to_string(e) == "0.0.0.0:9000");
  CHECK_THROWS_AS(parse_endpoint("host:"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("host:99999"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("abc"), std::invalid_argument);
}

TEST_CASE("a console connects, streams snapshots and gets an intent acknowledged") {
  Simulation sim(short_run(3.0), 7);
  LiveServer server(sim, Endpoint{"127.0.0.1", 0});
  REQUIRE(server.port() != 0);
  TestClient client(server.port());

  std::vector<json> frames;
  bool sent = false;
  while (!sim.done()) {
    server.poll_io(0);
    sim.step();
    server.poll_io(0);
    for (auto& f : client.read_frames()) frames.push_back(std::move(f));
    if (!sent && sim.now() >= 0.5) {
      IntentMessage m;
      m.intent_id = 9;
      m.action = "spawn_obstacle";
      m.focus_point = Point2{20.0, 5.0};
      client.send_line(encode_frame(IntentFrame{m}));
      sent = true;
    }
  }
  for (int i = 0; i < 5; ++i) {
    server.poll_io(5);
    for (auto& f : client.read_frames()) frames.push_back(std::move(f));
  }
  CHECK(server.connections() == 1);
  REQUIRE_FALSE(frames.empty());
  CHECK(frames.front()["type"] == "resync");
  std::size_t snapshots = 0;
  bool ack = false;
  std::uint64_t last_seq = 0;
  bool monotonic = true;
  for (const auto& f : frames) {
    if (f["type"] == "snapshot") {
      ++snapshots;
      const auto seq = f["seq"].get<std::uint64_t>();
      monotonic &= seq > last_seq;
      last_seq = seq;
    }
    ack |= f["type"] == "instruction_ack" && f["intent_id"] == 9 && f["accepted"] == true;
  }
  CHECK(snapshots > 100);
  CHECK(monotonic);
  CHECK(ack);

  client.close();
  for (int i = 0; i < 3; ++i) server.poll_io(5);
  CHECK(server.connections() == 0);
}

TEST_CASE("run paces ticks against the wall clock") {
  Simulation sim(short_run(0.5), 7);
  LiveServer server(sim, Endpoint{"127.0.0.1", 0});
  const auto start = std::chrono::steady_clock::now();
  server.run(5.0);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(sim.done());
  CHECK(elapsed >= 0.09);
  CHECK(elapsed < 2.0);
}

TEST_CASE("busy port is a runtime error") {
  Simulation sim(short_run(0.1), 7);
  LiveServer a(sim, Endpoint{"127.0.0.1", 0});
  CHECK_THROWS(LiveServer(sim, Endpoint{"127.0.0.1", a.port()}));
}

}
