#include "mixtwin/wire.hpp"

#include <cmath>

#include "mixtwin/errors.hpp"

namespace mixtwin {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void fail(const std::string& what) { throw ProtocolError(what); }

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

std::string text(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t unsigned_int(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    fail(std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool boolean(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

EntityId entity_id(const json& j, const char* key) {
  auto id = parse_entity_id(text(j, key));
  if (!id) fail(std::string("field '") + key + "' is not an entity id");
  return *id;
}

template <class Frame>
json state_json(const EntityStateIn<Frame>& s) {
  return json{{"id", to_string(s.id)}, {"t", s.t},           {"x", s.x},
              {"y", s.y},              {"heading", s.heading}, {"speed", s.speed},
              {"yaw_rate", s.yaw_rate}, {"accel", s.accel},   {"source", to_string(s.source)}};
}

template <class Frame>
EntityStateIn<Frame> state_from(const json& j) {
  EntityStateIn<Frame> s;
  s.id = entity_id(j, "id");
  s.t = number(j, "t");
  s.x = number(j, "x");
  s.y = number(j, "y");
  s.heading = number(j, "heading");
  s.speed = number(j, "speed");
  s.yaw_rate = number_or(j, "yaw_rate", 0.0);
  s.accel = number_or(j, "accel", 0.0);
  if (j.contains("source")) {
    auto src = parse_source(text(j, "source"));
    if (!src) fail("unknown source");
    s.source = *src;
  }
  return s;
}

json facility_json(const FacilityState& f) {
  return json{{"id", to_string(f.id)}, {"channel", f.channel}, {"status", to_string(f.status)}, {"t", f.t}};
}

FacilityState facility_from(const json& j) {
  FacilityState f;
  f.id = entity_id(j, "id");
  f.channel = static_cast<int>(number(j, "channel"));
  auto status = parse_facility_status(text(j, "status"));
  if (!status) fail("unknown facility status");
  f.status = *status;
  f.t = number(j, "t");
  return f;
}

std::string_view profile_kind_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::SuddenBrake: return "sudden_brake";
    case ProfileKind::Sinusoid: return "sinusoid";
    case ProfileKind::HandDrawn: return "hand_drawn";
  }
  return "unknown";
}

json command_body_json(const NativeCommandBody& body) {
  return std::visit(Overloaded{
                        [](const SetTargetSpeed& c) { return json{{"kind", "SetTargetSpeed"}, {"speed", c.speed}}; },
                        [](const SetSteering& c) { return json{{"kind", "SetSteering"}, {"angle", c.angle}}; },
                        [](const SetSpeedProfile& c) {
                          return json{{"kind", "SetSpeedProfile"}, {"profile", profile_to_json(c.profile)}};
                        },
                        [](const BoardByte& c) {
                          const std::uint8_t b = c.value;
                          return json{{"kind", "BoardByte"}, {"byte", to_hex(std::span(&b, 1))}};
                        },
                    },
                    body);
}

NativeCommandBody command_body_from(const json& j) {
  const std::string kind = text(j, "kind");
  if (kind == "SetTargetSpeed") return SetTargetSpeed{number(j, "speed")};
  if (kind == "SetSteering") return SetSteering{number(j, "angle")};
  if (kind == "SetSpeedProfile") return SetSpeedProfile{profile_from_json(field(j, "profile"))};
  if (kind == "BoardByte") {
    auto bytes = from_hex(text(j, "byte"));
    if (bytes.size() != 1) fail("board byte must be one byte");
    return BoardByte{bytes[0]};
  }
  fail("unknown command kind '" + kind + "'");
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0x0F];
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) fail("odd-length hex string");
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) fail("invalid hex digit");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

json profile_to_json(const SpeedProfile& p) {
  json j{{"kind", profile_kind_name(p.kind)}, {"t0", p.t0}};
  switch (p.kind) {
    case ProfileKind::SuddenBrake:
      j["floor_speed"] = p.floor_speed;
      j["deceleration"] = p.deceleration;
      j["hold"] = p.hold_duration;
      j["recovery"] = p.recovery_duration;
      j["recovery_mode"] = p.recovery == RecoveryMode::Ramp ? "ramp" : "wait_then_step";
      break;
    case ProfileKind::Sinusoid:
      j["amplitude"] = p.amplitude;
      j["frequency"] = p.frequency;
      break;
    case ProfileKind::HandDrawn: {
      json samples = json::array();
      for (const auto& [t, v] : p.samples) samples.push_back(json::array({t, v}));
      j["samples"] = samples;
      break;
    }
  }
  return j;
}

SpeedProfile profile_from_json(const json& j) {
  if (!j.is_object()) fail("profile must be an object");
  const std::string kind = text(j, "kind");
  SpeedProfile p;
  p.t0 = number_or(j, "t0", 0.0);
  if (kind == "sudden_brake") {
    p.kind = ProfileKind::SuddenBrake;
    p.floor_speed = number_or(j, "floor_speed", p.floor_speed);
    p.deceleration = number_or(j, "deceleration", p.deceleration);
    p.hold_duration = number_or(j, "hold", p.hold_duration);
    p.recovery_duration = number_or(j, "recovery", p.recovery_duration);
    if (j.contains("recovery_mode")) {
      const std::string mode = text(j, "recovery_mode");
      if (mode == "ramp") {
        p.recovery = RecoveryMode::Ramp;
      } else if (mode == "wait_then_step") {
        p.recovery = RecoveryMode::WaitThenStep;
      } else {
        fail("unknown recovery_mode '" + mode + "'");
      }
    }
  } else if (kind == "sinusoid") {
    p.kind = ProfileKind::Sinusoid;
    p.amplitude = number(j, "amplitude");
    p.frequency = number(j, "frequency");
  } else if (kind == "hand_drawn") {
    p.kind = ProfileKind::HandDrawn;
    const json& samples = field(j, "samples");
    if (!samples.is_array()) fail("samples must be an array");
    for (const auto& s : samples) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number()) {
        fail("each sample must be [t, speed]");
      }
      p.samples.emplace_back(s[0].get<double>(), s[1].get<double>());
    }
  } else {
    fail("unknown profile kind '" + kind + "'");
  }
  return p;
}

std::string_view frame_type(const Frame& frame) {
  return std::visit(Overloaded{
                        [](const StateUpdateFrame&) { return std::string_view("state_update"); },
                        [](const SnapshotFrame&) { return std::string_view("snapshot"); },
                        [](const IntentFrame&) { return std::string_view("intent"); },
                        [](const AckFrame&) { return std::string_view("instruction_ack"); },
                        [](const EventFrame&) { return std::string_view("event"); },
                        [](const RegisterFrame&) { return std::string_view("register"); },
                        [](const ResyncFrame&) { return std::string_view("resync"); },
                        [](const CommandFrame&) { return std::string_view("command"); },
                        [](const FacilityFrame&) { return std::string_view("facility_frame"); },
                    },
                    frame);
}

std::string encode_frame(const Frame& frame) {
  json j = std::visit(
      Overloaded{
          [](const StateUpdateFrame& f) { return state_json(f.state); },
          [](const SnapshotFrame& f) {
            json entities = json::array();
            for (const auto& e : f.snapshot.entities) entities.push_back(state_json(e));
            json facilities = json::array();
            for (const auto& fs : f.snapshot.facilities) facilities.push_back(facility_json(fs));
            json stale = json::array();
            for (const auto& id : f.snapshot.stale) stale.push_back(to_string(id));
            return json{{"seq", f.snapshot.seq},
                        {"t", f.snapshot.t},
                        {"entities", entities},
                        {"facilities", facilities},
                        {"stale", stale}};
          },
          [](const IntentFrame& f) {
            const IntentMessage& m = f.intent;
            json j{{"intent_id", m.intent_id}, {"device", m.device}, {"action", m.action}};
            if (m.focus_entity) {
              j["focus"] = to_string(*m.focus_entity);
            } else if (m.focus_point) {
              j["focus"] = json{{"x", m.focus_point->x}, {"y", m.focus_point->y}};
            } else {
              j["focus"] = nullptr;
            }
            j["payload"] = m.payload;
            return j;
          },
          [](const AckFrame& f) {
            return json{{"intent_id", f.intent_id},
                        {"accepted", f.accepted},
                        {"clamped", f.clamped},
                        {"reason", f.reason}};
          },
          [](const EventFrame& f) {
            return json{{"t", f.event.t},
                        {"event", f.event.type},
                        {"entity", f.event.entity},
                        {"detail", f.event.detail},
                        {"value", f.event.value}};
          },
          [](const RegisterFrame& f) {
            const auto& tr = f.entry.transform;
            const auto& b = f.entry.bounds;
            return json{{"id", to_string(f.id)},
                        {"transform",
                         {{"scale", tr.scale}, {"offset_x", tr.offset_x}, {"offset_y", tr.offset_y},
                          {"rotation", tr.rotation}}},
                        {"format", to_string(f.entry.format)},
                        {"bounds",
                         {{"speed_max", b.speed_max}, {"steer_max", b.steer_max}, {"steer_rate_max", b.steer_rate_max}}}};
          },
          [](const ResyncFrame& f) { return json{{"seq", f.seq}}; },
          [](const CommandFrame& f) {
            json j = command_body_json(f.command.body);
            j["target"] = to_string(f.command.target);
            j["issued_at"] = f.command.issued_at;
            return j;
          },
          [](const FacilityFrame& f) {
            return json{{"direction", f.direction == FacilityFrame::Direction::Status ? "status" : "command"},
                        {"t", f.t},
                        {"hex", to_hex(f.bytes)}};
          },
      },
      frame);
  j["type"] = frame_type(frame);
  return j.dump();
}

Frame decode_frame(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) fail("frame must be an object");
  const std::string type = text(j, "type");
  try {
    if (type == "state_update") return StateUpdateFrame{state_from<NativeFrameTag>(j)};
    if (type == "snapshot") {
      SnapshotFrame f;
      f.snapshot.seq = unsigned_int(j, "seq");
      f.snapshot.t = number(j, "t");
      for (const auto& e : field(j, "entities")) f.snapshot.entities.push_back(state_from<MixedFrameTag>(e));
      for (const auto& fs : field(j, "facilities")) f.snapshot.facilities.push_back(facility_from(fs));
      if (j.contains("stale")) {
        for (const auto& s : j["stale"]) {
          auto id = s.is_string() ? parse_entity_id(s.get<std::string>()) : std::nullopt;
          if (!id) fail("stale entry is not an entity id");
          f.snapshot.stale.push_back(*id);
        }
      }
      return f;
    }
    if (type == "intent") {
      IntentFrame f;
      IntentMessage& m = f.intent;
      m.intent_id = unsigned_int(j, "intent_id");
      m.device = j.contains("device") ? text(j, "device") : std::string{};
      m.action = text(j, "action");
      if (j.contains("focus")) {
        const json& focus = j["focus"];
        if (focus.is_string()) {
          auto id = parse_entity_id(focus.get<std::string>());
          if (!id) fail("focus is not an entity id");
          m.focus_entity = id;
        } else if (focus.is_object()) {
          m.focus_point = Point2{number(focus, "x"), number(focus, "y")};
        } else if (!focus.is_null()) {
          fail("focus must be an entity id, a point or null");
        }
      }
      if (j.contains("payload")) {
        const json& payload = j["payload"];
        if (!payload.is_object()) fail("payload must be an object");
        for (const auto& [k, v] : payload.items()) {
          if (!v.is_number()) fail("payload '" + k + "' must be a number");
          m.payload[k] = v.get<double>();
        }
      }
      return f;
    }
    if (type == "instruction_ack") {
      return AckFrame{unsigned_int(j, "intent_id"), boolean(j, "accepted"), boolean(j, "clamped"),
                      text(j, "reason")};
    }
    if (type == "event") {
      EventFrame f;
      f.event.t = number(j, "t");
      f.event.type = text(j, "event");
      f.event.entity = j.contains("entity") ? text(j, "entity") : std::string{};
      f.event.detail = j.contains("detail") ? text(j, "detail") : std::string{};
      f.event.value = number_or(j, "value", 0.0);
      return f;
    }
    if (type == "register") {
      RegisterFrame f;
      f.id = entity_id(j, "id");
      if (j.contains("transform")) {
        const json& tr = j["transform"];
        f.entry.transform.scale = number_or(tr, "scale", 1.0);
        f.entry.transform.offset_x = number_or(tr, "offset_x", 0.0);
        f.entry.transform.offset_y = number_or(tr, "offset_y", 0.0);
        f.entry.transform.rotation = number_or(tr, "rotation", 0.0);
      }
      f.entry.format = CommandFormat::WireProtocol;
      if (j.contains("format")) {
        auto format = parse_command_format(text(j, "format"));
        if (!format) fail("unknown command format");
        f.entry.format = *format;
      }
      if (j.contains("bounds")) {
        const json& b = j["bounds"];
        f.entry.bounds.speed_max = number_or(b, "speed_max", f.entry.bounds.speed_max);
        f.entry.bounds.steer_max = number_or(b, "steer_max", f.entry.bounds.steer_max);
        f.entry.bounds.steer_rate_max = number_or(b, "steer_rate_max", f.entry.bounds.steer_rate_max);
      }
      return f;
    }
    if (type == "resync") return ResyncFrame{unsigned_int(j, "seq")};
    if (type == "command") {
      CommandFrame f;
      f.command.target = entity_id(j, "target");
      f.command.issued_at = number(j, "issued_at");
      f.command.body = command_body_from(j);
      return f;
    }
    if (type == "facility_frame") {
      FacilityFrame f;
      const std::string dir = text(j, "direction");
      if (dir == "status") {
        f.direction = FacilityFrame::Direction::Status;
      } else if (dir == "command") {
        f.direction = FacilityFrame::Direction::Command;
      } else {
        fail("unknown facility_frame direction '" + dir + "'");
      }
      f.t = number(j, "t");
      f.bytes = from_hex(text(j, "hex"));
      return f;
    }
  } catch (const json::exception& e) {
    fail(std::string("bad field: ") + e.what());
  }
  fail("unknown frame type '" + type + "'");
}

// ---------------------------------------------------------------------------

WireSession::WireSession(TwinHub& hub, LineSink send_line) : hub_(hub), send_line_(std::move(send_line)) {}

WireSession::~WireSession() {
  if (subscription_) hub_.unsubscribe(*subscription_);
  for (const auto& id : registered_) {
    if (hub_.is_registered(id)) hub_.set_sink(id, {});
  }
}

void WireSession::reply(const Frame& frame) { send_line_(encode_frame(frame)); }

void WireSession::send_event(const Event& event) { reply(EventFrame{event}); }

bool WireSession::handle_line(std::string_view line, double t_now) {
  Frame frame;
  try {
    frame = decode_frame(line);
  } catch (const ProtocolError& e) {
    ++protocol_errors_;
    send_event({t_now, "protocol_error", {}, e.what(), 0.0});
    return false;
  }

  if (auto* reg = std::get_if<RegisterFrame>(&frame)) {
    try {
      LineSink send = send_line_;
      hub_.register_entity(reg->id, reg->entry, [send](const NativeCommand& cmd) {
        return send(encode_frame(CommandFrame{cmd}));
      });
      registered_.push_back(reg->id);
      send_event({t_now, "registered", to_string(reg->id), {}, 0.0});
    } catch (const RegistrationError& e) {
      send_event({t_now, "register_rejected", to_string(reg->id), e.what(), 0.0});
    }
    return true;
  }
  if (auto* update = std::get_if<StateUpdateFrame>(&frame)) {
    const IngestResult r = hub_.ingest_state_update(update->state);
    if (!r.accepted) send_event({t_now, "ingest_rejected", to_string(update->state.id), r.reason, 0.0});
    return true;
  }
  if (auto* intent = std::get_if<IntentFrame>(&frame)) {
    const IntentOutcome r = hub_.submit_intent(intent->intent, t_now);
    reply(AckFrame{intent->intent.intent_id, r.accepted, r.clamped, r.reason});
    return true;
  }
  if (auto* fac = std::get_if<FacilityFrame>(&frame)) {
    if (fac->direction == FacilityFrame::Direction::Status) {
      hub_.ingest_status_frame(fac->bytes, fac->t);
      return true;
    }
  }
  ++protocol_errors_;
  send_event({t_now, "protocol_error", {}, std::string(frame_type(frame)) + " frames are hub-to-client only", 0.0});
  return false;
}

void WireSession::subscribe(std::set<EntityKind> filter, std::size_t capacity) {
  if (subscription_) hub_.unsubscribe(*subscription_);
  subscription_ = hub_.subscribe(std::move(filter), capacity);
}

bool WireSession::streaming() const { return subscription_ && hub_.subscription_open(*subscription_); }

std::size_t WireSession::flush_stream() {
  if (!subscription_) return 0;
  std::size_t sent = 0;
  for (const auto& item : hub_.drain(*subscription_)) {
    switch (item.kind) {
      case StreamItem::Kind::Resync: reply(ResyncFrame{item.seq}); break;
      case StreamItem::Kind::Snapshot: reply(SnapshotFrame{item.snapshot}); break;
      case StreamItem::Kind::Overflow:
        send_event({hub_.last_snapshot().t, "overflow", {}, "subscriber too slow; stream closed",
                    static_cast<double>(item.seq)});
        break;
    }
    ++sent;
  }
  return sent;
}

}  // namespace mixtwin
