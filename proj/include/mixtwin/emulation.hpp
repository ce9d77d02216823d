#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mixtwin/entity.hpp"

namespace mixtwin {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Onboard sensing of a scaled vehicle. All magnitudes are native units.

struct SensorModel {
  double pos_sigma = 1e-4;             // m, motion-capture grade
  double heading_sigma = 0.1 * kPi / 180.0;  // rad
  double speed_quantum = 0.005;        // m/s, Hall-sensor resolution
  double report_period = 0.02;         // s
  double actuation_lag = 0.04;         // s

  void validate() const;
};

/// True when t lies on the report grid of the sensor.
bool report_due(double t, const SensorModel& model);

/// Gaussian position/heading noise, speed rounded to the nearest quantum,
/// timestamp snapped down to the report grid. Source is set to Onboard.
NativeState emulate_sensor_reading(const NativeState& truth, const SensorModel& model, Rng& rng);

/// Commands become effective exactly `lag` seconds after receipt, in order.
template <class Command>
class ActuationDelayLine {
 public:
  explicit ActuationDelayLine(double lag = 0.0) : lag_(lag) {}

  void push(double t_received, Command command) {
    pending_.push_back({t_received + lag_, std::move(command)});
  }

  // Applies every command due by t_now; returns the one currently in effect.
  const std::optional<Command>& effective(double t_now) {
    constexpr double kEps = 1e-9;
    while (!pending_.empty() && pending_.front().first <= t_now + kEps) {
      current_ = std::move(pending_.front().second);
      effective_since_ = pending_.front().first;
      pending_.pop_front();
    }
    return current_;
  }

  double effective_since() const { return effective_since_; }
  double lag() const { return lag_; }
  std::size_t pending() const { return pending_.size(); }

 private:
  double lag_;
  std::deque<std::pair<double, Command>> pending_;
  std::optional<Command> current_;
  double effective_since_ = 0.0;
};

// ---------------------------------------------------------------------------
// Roadside facility control board.

inline constexpr std::size_t kBoardChannels = 88;
inline constexpr std::size_t kStatusPayloadBytes = kBoardChannels / 8;  // 11
inline constexpr std::size_t kStatusFrameBytes = kStatusPayloadBytes + 2;  // 13
inline constexpr std::uint8_t kStatusHeader = 0x55;

using ChannelBits = std::bitset<kBoardChannels>;
using StatusFrame = std::array<std::uint8_t, kStatusFrameBytes>;

struct ChannelEntry {
  EntityId facility;
  std::uint8_t on_byte = 0;   // open / on
  std::uint8_t off_byte = 0;  // close / off
};

struct ChannelCommand {
  int channel = -1;
  bool set_on = false;
};

class ChannelMap {
 public:
  ChannelMap() = default;
  explicit ChannelMap(std::map<int, ChannelEntry> entries);

  // Factory layout: streetlights on 0-38 and 42-75, signals on 76-86, gates
  // left/middle/right on 39/40/41. Channel 39 uses 0x26 / 0x8A; the other
  // channels take the next free byte pairs in ascending order.
  static ChannelMap default_layout();

  const std::map<int, ChannelEntry>& entries() const { return entries_; }
  std::optional<ChannelCommand> decode(std::uint8_t byte) const;
  std::optional<int> channel_of(const EntityId& facility) const;
  const ChannelEntry* at(int channel) const;
  std::size_t count(EntityKind kind) const;

 private:
  std::map<int, ChannelEntry> entries_;
  std::map<std::uint8_t, ChannelCommand> by_byte_;
  std::map<EntityId, int> by_facility_;
};

StatusFrame encode_status_frame(const ChannelBits& bits);

/// Verifies header, length and XOR checksum. Throws StatusFrameError.
ChannelBits parse_status_frame(std::span<const std::uint8_t> bytes);

/// Maps channel bits to facility states through the channel map.
std::vector<FacilityState> resolve_facilities(const ChannelBits& bits, const ChannelMap& map,
                                              double t);

enum class BoardReply { Ack, Nack };

/// Single-owner state machine for the emulated control board. Gates take
/// `gate_travel_time` to change their status bit; lights and signals switch
/// immediately.
class ControlBoard {
 public:
  explicit ControlBoard(ChannelMap map, double gate_travel_time = 1.0);

  BoardReply command(std::uint8_t byte, double t_now);
  StatusFrame query(double t_now);
  void advance(double t_now);

  const ChannelBits& bits() const { return bits_; }
  // Test hook: overwrite the whole channel state.
  void load_state(const ChannelBits& bits);
  // Fault injection: subsequent frames carry a corrupted checksum.
  void set_corrupt_checksum(bool corrupt) { corrupt_checksum_ = corrupt; }
  const ChannelMap& channel_map() const { return map_; }

 private:
  struct Transition {
    int channel;
    bool value;
    double t_effective;
  };

  ChannelMap map_;
  double gate_travel_time_;
  ChannelBits bits_;
  std::vector<Transition> pending_;
  bool corrupt_checksum_ = false;
};

}  // namespace mixtwin
