#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mixtwin/events.hpp"
#include "mixtwin/hub.hpp"

namespace mixtwin {

// Newline-delimited JSON frames. Every frame is one object with a "type"
// field; the schema is listed in docs/wire_protocol.md.

struct StateUpdateFrame {
  NativeState state;
};
struct SnapshotFrame {
  MixedSnapshot snapshot;
};
struct IntentFrame {
  IntentMessage intent;
};
struct AckFrame {
  std::uint64_t intent_id = 0;
  bool accepted = false;
  bool clamped = false;
  std::string reason;
};
struct EventFrame {
  Event event;
};
struct RegisterFrame {
  EntityId id;
  DispatchEntry entry;
};
struct ResyncFrame {
  std::uint64_t seq = 0;
};
struct CommandFrame {
  NativeCommand command;
};
struct FacilityFrame {
  enum class Direction { Status, Command };
  Direction direction = Direction::Status;
  double t = 0.0;
  std::vector<std::uint8_t> bytes;
};

using Frame = std::variant<StateUpdateFrame, SnapshotFrame, IntentFrame, AckFrame, EventFrame,
                           RegisterFrame, ResyncFrame, CommandFrame, FacilityFrame>;

std::string_view frame_type(const Frame& frame);

/// One line of text without the trailing newline; keys sorted.
std::string encode_frame(const Frame& frame);
/// Throws ProtocolError on malformed JSON, unknown type or bad fields.
Frame decode_frame(std::string_view line);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

nlohmann::json profile_to_json(const SpeedProfile& profile);
SpeedProfile profile_from_json(const nlohmann::json& j);

/// Serves one client connection on the hub side: applies inbound frames to
/// the hub and writes replies, commands, snapshots and events back through
/// `send_line`.
class WireSession {
 public:
  using LineSink = std::function<bool(const std::string&)>;

  WireSession(TwinHub& hub, LineSink send_line);
  ~WireSession();
  WireSession(const WireSession&) = delete;
  WireSession& operator=(const WireSession&) = delete;

  // False when the line was rejected as a protocol error.
  bool handle_line(std::string_view line, double t_now);

  // Snapshot stream; a subscription starts with a resync frame.
  void subscribe(std::set<EntityKind> filter = {}, std::size_t capacity = 0);
  // Sends queued snapshot/resync/overflow frames. Returns the frames sent.
  std::size_t flush_stream();
  bool streaming() const;

  void send_event(const Event& event);
  std::size_t protocol_errors() const { return protocol_errors_; }
  const std::vector<EntityId>& registered() const { return registered_; }

 private:
  void reply(const Frame& frame);

  TwinHub& hub_;
  LineSink send_line_;
  std::optional<SubscriptionId> subscription_;
  std::size_t protocol_errors_ = 0;
  std::vector<EntityId> registered_;
};

}  // namespace mixtwin
