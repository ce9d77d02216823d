#include "mixtwin/emulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mixtwin/errors.hpp"

namespace mixtwin {

void SensorModel::validate() const {
  if (!(pos_sigma >= 0.0 && heading_sigma >= 0.0 && speed_quantum >= 0.0 &&
        actuation_lag >= 0.0)) {
    throw std::invalid_argument("sensor model magnitudes must be nonnegative");
  }
  if (!(report_period > 0.0)) throw std::invalid_argument("sensor report period must be positive");
}

bool report_due(double t, const SensorModel& m) {
  const double k = std::round(t / m.report_period);
  return std::abs(t - k * m.report_period) < 1e-9;
}

NativeState emulate_sensor_reading(const NativeState& truth, const SensorModel& m, Rng& rng) {
  NativeState out = truth;
  out.source = Source::Onboard;
  if (m.pos_sigma > 0.0) {
    std::normal_distribution<double> pos(0.0, m.pos_sigma);
    out.x += pos(rng);
    out.y += pos(rng);
  }
  if (m.heading_sigma > 0.0) {
    std::normal_distribution<double> head(0.0, m.heading_sigma);
    out.heading = normalize_angle(out.heading + head(rng));
  }
  if (m.speed_quantum > 0.0) {
    out.speed = std::round(truth.speed / m.speed_quantum) * m.speed_quantum;
  }
  out.t = std::floor(truth.t / m.report_period + 1e-9) * m.report_period;
  return out;
}

ChannelMap::ChannelMap(std::map<int, ChannelEntry> entries) : entries_(std::move(entries)) {
  for (const auto& [channel, e] : entries_) {
    if (channel < 0 || channel >= static_cast<int>(kBoardChannels)) {
      throw std::invalid_argument("channel " + std::to_string(channel) + " outside 0-87");
    }
    if (!is_facility(e.facility.kind)) {
      throw std::invalid_argument("channel " + std::to_string(channel) + " maps a non-facility");
    }
    if (e.on_byte == e.off_byte) {
      throw std::invalid_argument("channel " + std::to_string(channel) +
                                  " uses the same byte for both commands");
    }
    for (auto [byte, on] : {std::pair{e.on_byte, true}, std::pair{e.off_byte, false}}) {
      if (!by_byte_.emplace(byte, ChannelCommand{channel, on}).second) {
        throw std::invalid_argument("command byte reused on channel " + std::to_string(channel));
      }
    }
    if (!by_facility_.emplace(e.facility, channel).second) {
      throw std::invalid_argument(to_string(e.facility) + " mapped to more than one channel");
    }
  }
}

ChannelMap ChannelMap::default_layout() {
  constexpr int kLeftGate = 39;
  constexpr std::uint8_t kLeftGateOpen = 0x26;
  constexpr std::uint8_t kLeftGateClose = 0x8A;
  // Reserved: 0x00 (idle line), 0x55 (status header), 0xA5 (query), 0xFF (unmapped sentinel).
  auto reserved = [](int b) {
    return b == 0x00 || b == 0x55 || b == 0xA5 || b == 0xFF || b == kLeftGateOpen ||
           b == kLeftGateClose;
  };
  int next = 0x01;
  auto take = [&]() {
    while (reserved(next)) ++next;
    return static_cast<std::uint8_t>(next++);
  };

  std::map<int, ChannelEntry> entries;
  std::uint32_t light = 0;
  for (int ch = 0; ch <= 75; ++ch) {
    if (ch >= 39 && ch <= 41) {
      const auto gate = static_cast<std::uint32_t>(ch - 39);
      if (ch == kLeftGate) {
        entries[ch] = {{EntityKind::BarrierGate, gate}, kLeftGateOpen, kLeftGateClose};
      } else {
        const auto on = take();
        entries[ch] = {{EntityKind::BarrierGate, gate}, on, take()};
      }
      continue;
    }
    const auto on = take();
    entries[ch] = {{EntityKind::Streetlight, light++}, on, take()};
  }
  for (int ch = 76; ch <= 86; ++ch) {
    const auto on = take();
    entries[ch] = {{EntityKind::TrafficSignal, static_cast<std::uint32_t>(ch - 76)}, on, take()};
  }
  return ChannelMap(std::move(entries));
}

std::optional<ChannelCommand> ChannelMap::decode(std::uint8_t byte) const {
  auto it = by_byte_.find(byte);
  if (it == by_byte_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> ChannelMap::channel_of(const EntityId& facility) const {
  auto it = by_facility_.find(facility);
  if (it == by_facility_.end()) return std::nullopt;
  return it->second;
}

const ChannelEntry* ChannelMap::at(int channel) const {
  auto it = entries_.find(channel);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t ChannelMap::count(EntityKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [kind](const auto& e) { return e.second.facility.kind == kind; }));
}

StatusFrame encode_status_frame(const ChannelBits& bits) {
  StatusFrame frame{};
  frame[0] = kStatusHeader;
  std::uint8_t checksum = 0;
  for (std::size_t byte = 0; byte < kStatusPayloadBytes; ++byte) {
    std::uint8_t value = 0;
    for (std::size_t bit = 0; bit < 8; ++bit) {
      if (bits.test(byte * 8 + bit)) value |= static_cast<std::uint8_t>(1u << bit);
    }
    frame[1 + byte] = value;
    checksum ^= value;
  }
  frame[kStatusFrameBytes - 1] = checksum;
  return frame;
}

ChannelBits parse_status_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kStatusFrameBytes) {
    throw StatusFrameError("status frame length " + std::to_string(bytes.size()) + ", expected 13");
  }
  if (bytes[0] != kStatusHeader) throw StatusFrameError("status frame header is not 0x55");
  std::uint8_t checksum = 0;
  ChannelBits bits;
  for (std::size_t byte = 0; byte < kStatusPayloadBytes; ++byte) {
    const std::uint8_t value = bytes[1 + byte];
    checksum ^= value;
    for (std::size_t bit = 0; bit < 8; ++bit) {
      if (value & (1u << bit)) bits.set(byte * 8 + bit);
    }
  }
  if (checksum != bytes[kStatusFrameBytes - 1]) {
    throw StatusFrameError("status frame checksum mismatch");
  }
  return bits;
}

std::vector<FacilityState> resolve_facilities(const ChannelBits& bits, const ChannelMap& map,
                                              double t) {
  std::vector<FacilityState> out;
  out.reserve(map.entries().size());
  for (const auto& [channel, e] : map.entries()) {
    out.push_back({e.facility, channel,
                   status_from_bit(e.facility.kind, bits.test(static_cast<std::size_t>(channel))), t});
  }
  return out;
}

ControlBoard::ControlBoard(ChannelMap map, double gate_travel_time)
    : map_(std::move(map)), gate_travel_time_(gate_travel_time) {
  if (!(gate_travel_time_ >= 0.0)) throw std::invalid_argument("gate travel time must be >= 0");
}

void ControlBoard::advance(double t_now) {
  constexpr double kEps = 1e-9;
  std::erase_if(pending_, [&](const Transition& tr) {
    if (tr.t_effective <= t_now + kEps) {
      bits_.set(static_cast<std::size_t>(tr.channel), tr.value);
      return true;
    }
    return false;
  });
}

BoardReply ControlBoard::command(std::uint8_t byte, double t_now) {
  advance(t_now);
  const auto decoded = map_.decode(byte);
  if (!decoded) return BoardReply::Nack;
  const auto channel = static_cast<std::size_t>(decoded->channel);
  const ChannelEntry* entry = map_.at(decoded->channel);

  auto pending = std::find_if(pending_.begin(), pending_.end(),
                              [&](const Transition& tr) { return tr.channel == decoded->channel; });
  const bool target = pending != pending_.end() ? pending->value : bits_.test(channel);
  if (target == decoded->set_on) return BoardReply::Ack;
  if (pending != pending_.end()) pending_.erase(pending);
  if (bits_.test(channel) == decoded->set_on) return BoardReply::Ack;  // reversal mid-travel

  if (entry->facility.kind == EntityKind::BarrierGate && gate_travel_time_ > 0.0) {
    pending_.push_back({decoded->channel, decoded->set_on, t_now + gate_travel_time_});
  } else {
    bits_.set(channel, decoded->set_on);
  }
  return BoardReply::Ack;
}

StatusFrame ControlBoard::query(double t_now) {
  advance(t_now);
  StatusFrame frame = encode_status_frame(bits_);
  if (corrupt_checksum_) frame[kStatusFrameBytes - 1] ^= 0x5A;
  return frame;
}

void ControlBoard::load_state(const ChannelBits& bits) {
  bits_ = bits;
  pending_.clear();
}

}  // namespace mixtwin
