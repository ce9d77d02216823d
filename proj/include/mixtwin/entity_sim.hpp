#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mixtwin/dynamics.hpp"
#include "mixtwin/emulation.hpp"
#include "mixtwin/events.hpp"
#include "mixtwin/frame.hpp"
#include "mixtwin/hub.hpp"
#include "mixtwin/wire.hpp"

namespace mixtwin {

enum class Realm { EmulatedPhysical, Virtual, ExternalVirtual };

std::string_view to_string(Realm realm);
std::optional<Realm> parse_realm(std::string_view text);

/// Transform implied by the realm: 1:14 for emulated physical vehicles,
/// identity otherwise.
FrameTransform realm_transform(Realm realm);

struct VehicleProcessConfig {
  EntityId id;
  Realm realm = Realm::Virtual;
  SensorModel sensor;             // used only by EmulatedPhysical
  double accel_limit = 3.0;       // m/s^2, mixed space
  double fail_safe_after = 1.0;   // s without commands before the hold is flagged
  bool brake_on_command_loss = false;
};

/// Native-side command executor for one vehicle. Holds the current base
/// target speed, an optional active profile, and the steering angle;
/// everything it stores is in native units.
class CommandState {
 public:
  void apply(const NativeCommandBody& body);
  double target_speed(double t);
  double steer() const { return steer_; }
  double base_speed() const { return base_speed_; }
  bool has_profile() const { return profile_.has_value(); }
  void set_base_speed(double v) { base_speed_ = v; }

 private:
  double base_speed_ = 0.0;
  double steer_ = 0.0;
  std::optional<SpeedProfile> profile_;
};

/// An in-process vehicle: EmulatedPhysical (native 1:14 frame, onboard
/// sensor noise, quantized speed, actuation lag) or Virtual (mixed frame,
/// exact reports).
class VehicleProcess {
 public:
  VehicleProcess(VehicleProcessConfig config, const BicycleState& initial_native, Rng rng);

  const EntityId& id() const { return config_.id; }
  Realm realm() const { return config_.realm; }
  const FrameTransform& transform() const { return transform_; }

  // Called when a command arrives over the downlink.
  void receive(const NativeCommand& command, double t_arrival);

  // Advances truth to t; returns the state report for this tick, if one is due.
  std::optional<NativeState> step(double t, double dt, EventLog* log);

  // Stops the vehicle in place (collision freeze).
  void freeze();
  bool frozen() const { return frozen_; }

  const BicycleState& truth() const { return truth_; }
  NativeState truth_state(double t) const;
  const std::vector<NativeCommand>& command_log() const { return command_log_; }
  bool fail_safe_active() const { return fail_safe_flagged_; }

 private:
  VehicleProcessConfig config_;
  FrameTransform transform_;
  BicycleState truth_;
  Rng rng_;
  CommandState commands_;
  std::deque<std::pair<double, NativeCommandBody>> pending_;  // (t_effective, command)
  std::vector<NativeCommand> command_log_;
  double last_command_t_ = 0.0;
  bool fail_safe_flagged_ = false;
  bool frozen_ = false;
};

/// Roadside unit fronting the control board. Commands arrive as
/// facility_frame lines; status frames leave the same way.
class RsuProcess {
 public:
  RsuProcess(ChannelMap map, double gate_travel_time);

  // Applies a hub-to-RSU facility_frame command line. Returns the board reply.
  BoardReply handle_line(std::string_view line, double t);
  // Status frame line for time t.
  std::string poll(double t);

  ControlBoard& board() { return board_; }
  std::size_t nacks() const { return nacks_; }

 private:
  ControlBoard board_;
  std::size_t nacks_ = 0;
};

/// A vehicle simulated outside the hub that joins only through wire
/// frames: it registers, waits for the acknowledgement, then streams
/// state_update frames and executes command frames.
class ExternalVehicleClient {
 public:
  ExternalVehicleClient(EntityId id, const BicycleState& initial, double accel_limit);

  std::string register_line() const;
  void on_line(std::string_view line, double t);
  // Steps the local model; returns a state_update line once registered.
  std::optional<std::string> step(double t, double dt);

  bool registered() const { return registered_; }
  const EntityId& id() const { return id_; }
  const BicycleState& truth() const { return truth_; }
  NativeState truth_state(double t) const;
  void freeze();
  bool frozen() const { return frozen_; }
  std::size_t protocol_errors() const { return protocol_errors_; }

 private:
  EntityId id_;
  BicycleState truth_;
  double accel_limit_;
  CommandState commands_;
  bool registered_ = false;
  bool frozen_ = false;
  std::size_t protocol_errors_ = 0;
};

}  // namespace mixtwin
