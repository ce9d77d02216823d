#include "mixtwin/entity_sim.hpp"

#include <array>
#include <cmath>

#include "mixtwin/errors.hpp"

namespace mixtwin {

namespace {

constexpr double kEps = 1e-9;

constexpr std::array<std::pair<Realm, std::string_view>, 3> kRealmNames{{
    {Realm::EmulatedPhysical, "EmulatedPhysical"},
    {Realm::Virtual, "Virtual"},
    {Realm::ExternalVirtual, "ExternalVirtual"},
}};

NativeState state_of(const EntityId& id, const BicycleState& b, double t) {
  NativeState s;
  s.id = id;
  s.t = t;
  s.x = b.x;
  s.y = b.y;
  s.heading = b.heading;
  s.speed = b.speed;
  s.yaw_rate = b.yaw_rate;
  s.accel = b.accel;
  s.source = Source::Native;
  return s;
}

void stop_in_place(BicycleState& b) {
  b.speed = 0.0;
  b.accel = 0.0;
  b.yaw_rate = 0.0;
}

}  // namespace

std::string_view to_string(Realm realm) {
  for (const auto& [r, name] : kRealmNames) {
    if (r == realm) return name;
  }
  return "Unknown";
}

std::optional<Realm> parse_realm(std::string_view text) {
  for (const auto& [r, name] : kRealmNames) {
    if (name == text) return r;
  }
  return std::nullopt;
}

FrameTransform realm_transform(Realm realm) {
  return realm == Realm::EmulatedPhysical ? FrameTransform::scaled(kPhysicalTestbedScale)
                                          : FrameTransform::identity();
}

void CommandState::apply(const NativeCommandBody& body) {
  if (const auto* speed = std::get_if<SetTargetSpeed>(&body)) {
    base_speed_ = speed->speed;
  } else if (const auto* steer = std::get_if<SetSteering>(&body)) {
    steer_ = steer->angle;
  } else if (const auto* profile = std::get_if<SetSpeedProfile>(&body)) {
    profile_ = profile->profile;
  }
}

double CommandState::target_speed(double t) {
  if (profile_ && t > profile_->end_time(base_speed_)) profile_.reset();
  return profile_ ? evaluate_profile(*profile_, t, base_speed_) : base_speed_;
}

// ---------------------------------------------------------------------------

VehicleProcess::VehicleProcess(VehicleProcessConfig config, const BicycleState& initial_native, Rng rng)
    : config_(std::move(config)), transform_(realm_transform(config_.realm)), truth_(initial_native),
      rng_(std::move(rng)) {
  if (config_.realm == Realm::ExternalVirtual) {
    throw std::invalid_argument("external vehicles run outside the process host");
  }
  if (!is_vehicle(config_.id.kind)) throw std::invalid_argument(to_string(config_.id) + " is not a vehicle");
  config_.sensor.validate();
  if (!(config_.accel_limit > 0.0)) throw std::invalid_argument("accel limit must be positive");
  commands_.set_base_speed(initial_native.speed);
}

void VehicleProcess::receive(const NativeCommand& command, double t_arrival) {
  command_log_.push_back(command);
  last_command_t_ = t_arrival;
  fail_safe_flagged_ = false;
  const double lag = config_.realm == Realm::EmulatedPhysical ? config_.sensor.actuation_lag : 0.0;
  pending_.emplace_back(t_arrival + lag, command.body);
}

std::optional<NativeState> VehicleProcess::step(double t, double dt, EventLog* log) {
  while (!pending_.empty() && pending_.front().first <= t + kEps) {
    commands_.apply(pending_.front().second);
    pending_.pop_front();
  }

  if (frozen_) {
    stop_in_place(truth_);
  } else {
    if (!fail_safe_flagged_ && t - last_command_t_ > config_.fail_safe_after + kEps) {
      fail_safe_flagged_ = true;
      if (log) {
        log->emit(t, "fail_safe_hold", to_string(config_.id),
                  config_.brake_on_command_loss ? "no command received; braking to stop"
                                                : "no command received; holding last command",
                  t - last_command_t_);
      }
      if (config_.brake_on_command_loss) commands_ = CommandState{};
    }
    truth_ = bicycle_step(truth_, commands_.target_speed(t), commands_.steer(), dt,
                          config_.accel_limit / transform_.scale);
  }

  const NativeState exact = truth_state(t);
  if (config_.realm == Realm::EmulatedPhysical) {
    if (!report_due(t, config_.sensor)) return std::nullopt;
    return emulate_sensor_reading(exact, config_.sensor, rng_);
  }
  return exact;
}

void VehicleProcess::freeze() {
  frozen_ = true;
  stop_in_place(truth_);
}

NativeState VehicleProcess::truth_state(double t) const { return state_of(config_.id, truth_, t); }

// ---------------------------------------------------------------------------

RsuProcess::RsuProcess(ChannelMap map, double gate_travel_time) : board_(std::move(map), gate_travel_time) {}

BoardReply RsuProcess::handle_line(std::string_view line, double t) {
  const Frame frame = decode_frame(line);
  const auto* f = std::get_if<FacilityFrame>(&frame);
  if (f == nullptr || f->direction != FacilityFrame::Direction::Command || f->bytes.size() != 1) {
    throw ProtocolError("roadside unit expects one-byte facility_frame commands");
  }
  const BoardReply reply = board_.command(f->bytes[0], t);
  if (reply == BoardReply::Nack) ++nacks_;
  return reply;
}

std::string RsuProcess::poll(double t) {
  const StatusFrame frame = board_.query(t);
  return encode_frame(FacilityFrame{FacilityFrame::Direction::Status, t, {frame.begin(), frame.end()}});
}

// ---------------------------------------------------------------------------

ExternalVehicleClient::ExternalVehicleClient(EntityId id, const BicycleState& initial, double accel_limit)
    : id_(id), truth_(initial), accel_limit_(accel_limit) {
  commands_.set_base_speed(initial.speed);
}

std::string ExternalVehicleClient::register_line() const {
  RegisterFrame f;
  f.id = id_;
  f.entry.transform = FrameTransform::identity();
  f.entry.format = CommandFormat::WireProtocol;
  return encode_frame(f);
}

void ExternalVehicleClient::on_line(std::string_view line, double) {
  Frame frame;
  try {
    frame = decode_frame(line);
  } catch (const ProtocolError&) {
    ++protocol_errors_;
    return;
  }
  if (const auto* cmd = std::get_if<CommandFrame>(&frame)) {
    if (cmd->command.target == id_) commands_.apply(cmd->command.body);
  } else if (const auto* ev = std::get_if<EventFrame>(&frame)) {
    if (ev->event.type == "registered" && ev->event.entity == to_string(id_)) registered_ = true;
  }
}

std::optional<std::string> ExternalVehicleClient::step(double t, double dt) {
  if (frozen_) {
    stop_in_place(truth_);
  } else {
    truth_ = bicycle_step(truth_, commands_.target_speed(t), commands_.steer(), dt, accel_limit_);
  }
  if (!registered_) return std::nullopt;
  return encode_frame(StateUpdateFrame{truth_state(t)});
}

NativeState ExternalVehicleClient::truth_state(double t) const { return state_of(id_, truth_, t); }

void ExternalVehicleClient::freeze() {
  frozen_ = true;
  stop_in_place(truth_);
}

}  // namespace mixtwin
