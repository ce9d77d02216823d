#include "mixtwin/hub.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixtwin/errors.hpp"

namespace mixtwin {

const MixedEntityState* MixedSnapshot::find(const EntityId& id) const {
  for (const auto& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const FacilityState* MixedSnapshot::find_facility(const EntityId& id) const {
  for (const auto& f : facilities) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

namespace {

double payload_value(const IntentMessage& m, const std::string& key) {
  auto it = m.payload.find(key);
  if (it == m.payload.end()) throw IntentError("missing payload '" + key + "' for " + m.action);
  if (!std::isfinite(it->second)) throw IntentError("non-finite payload '" + key + "'");
  return it->second;
}

EntityId focus_vehicle(const IntentMessage& m, const MixedSnapshot& snapshot) {
  if (!m.focus_entity) throw IntentError(m.action + " needs an entity focus");
  if (!is_vehicle(m.focus_entity->kind) || snapshot.find(*m.focus_entity) == nullptr) {
    throw IntentError("focus " + to_string(*m.focus_entity) + " is not a vehicle in the mixed space");
  }
  return *m.focus_entity;
}

const FacilityState& focus_facility(const IntentMessage& m, const MixedSnapshot& snapshot) {
  if (!m.focus_entity) throw IntentError(m.action + " needs a facility focus");
  const FacilityState* f = snapshot.find_facility(*m.focus_entity);
  if (f == nullptr) throw IntentError("focus " + to_string(*m.focus_entity) + " is not a known facility");
  return *f;
}

std::string describe(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Instruction map_intent_to_instruction(const IntentMessage& m, const InteractionLogicTable& table,
                                      const MixedSnapshot& snapshot, const IntentContext& ctx) {
  const IntentTemplate* tpl = table.find(m.action);
  if (tpl == nullptr) throw IntentError("unknown action '" + m.action + "'");

  Instruction out;
  out.origin = Origin::Operator;
  out.issued_at = ctx.t_now;

  switch (tpl->mode) {
    case TemplateMode::RelativeSpeed: {
      out.target = focus_vehicle(m, snapshot);
      auto it = ctx.current_targets.find(out.target);
      const double base = it != ctx.current_targets.end() ? it->second : snapshot.find(out.target)->speed;
      out.body = SetTargetSpeed{base + tpl->delta};
      break;
    }
    case TemplateMode::AbsoluteSpeed:
      out.target = focus_vehicle(m, snapshot);
      out.body = SetTargetSpeed{payload_value(m, tpl->key)};
      break;
    case TemplateMode::AbsoluteSteer:
      out.target = focus_vehicle(m, snapshot);
      out.body = SetSteering{payload_value(m, tpl->key)};
      break;
    case TemplateMode::SuddenBrake: {
      out.target = focus_vehicle(m, snapshot);
      SpeedProfile p = sudden_brake_profile(ctx.t_now);
      if (m.payload.count("floor_speed")) p.floor_speed = payload_value(m, "floor_speed");
      if (m.payload.count("deceleration")) p.deceleration = payload_value(m, "deceleration");
      if (m.payload.count("hold")) p.hold_duration = payload_value(m, "hold");
      if (m.payload.count("recovery")) p.recovery_duration = payload_value(m, "recovery");
      out.body = SetSpeedProfile{p};
      break;
    }
    case TemplateMode::Sinusoid:
      out.target = focus_vehicle(m, snapshot);
      out.body = SetSpeedProfile{sinusoid_profile(ctx.t_now, payload_value(m, "amplitude"),
                                                  payload_value(m, "frequency"))};
      break;
    case TemplateMode::FacilityOpen:
    case TemplateMode::FacilityClose:
    case TemplateMode::FacilityOn:
    case TemplateMode::FacilityOff:
    case TemplateMode::FacilityToggle: {
      const FacilityState& f = focus_facility(m, snapshot);
      out.target = f.id;
      FacilityStatus status = FacilityStatus::Off;
      switch (tpl->mode) {
        case TemplateMode::FacilityOpen: status = FacilityStatus::Open; break;
        case TemplateMode::FacilityClose: status = FacilityStatus::Closed; break;
        case TemplateMode::FacilityOn: status = FacilityStatus::On; break;
        case TemplateMode::FacilityOff: status = FacilityStatus::Off; break;
        default: status = status_from_bit(f.id.kind, !status_bit(f.status)); break;
      }
      out.body = FacilitySet{status};
      break;
    }
    case TemplateMode::ObstacleAtPoint: {
      if (!m.focus_point) throw IntentError(m.action + " needs a point focus");
      if (!std::isfinite(m.focus_point->x) || !std::isfinite(m.focus_point->y) ||
          !ctx.road.contains(*m.focus_point)) {
        throw IntentError("point (" + describe(m.focus_point->x) + ", " + describe(m.focus_point->y) +
                          ") is outside the road bounds");
      }
      out.target = EntityId{EntityKind::Obstacle, 0};
      out.body = SpawnObstacle{*m.focus_point};
      break;
    }
    case TemplateMode::Release:
      out.target = focus_vehicle(m, snapshot);
      out.body = ReleaseControl{};
      break;
  }
  return out;
}

ValidationOutcome validate_instruction(const Instruction& i, const DispatchTable& table,
                                       const ValidationContext& ctx) {
  ValidationOutcome out;
  out.instruction = i;
  auto reject = [&](std::string reason) {
    out.accepted = false;
    out.reason = std::move(reason);
    return out;
  };

  const bool spawn = std::holds_alternative<SpawnObstacle>(i.body);
  auto entry = table.find(i.target);
  if (!spawn && entry == table.end()) return reject("target " + to_string(i.target) + " not registered");
  if (!body_compatible(i.body, i.target.kind)) {
    return reject(std::string(instruction_name(i.body)) + " incompatible with " +
                  std::string(to_string(i.target.kind)));
  }

  out.accepted = true;
  if (auto* speed = std::get_if<SetTargetSpeed>(&out.instruction.body)) {
    if (!std::isfinite(speed->speed)) return reject("non-finite target speed");
    const double clamped = std::clamp(speed->speed, 0.0, entry->second.bounds.speed_max);
    if (clamped != speed->speed) {
      out.clamped = true;
      out.reason = "speed " + describe(speed->speed) + " clamped to " + describe(clamped);
      speed->speed = clamped;
    }
  } else if (auto* steer = std::get_if<SetSteering>(&out.instruction.body)) {
    if (!std::isfinite(steer->angle)) return reject("non-finite steering angle");
    const auto& b = entry->second.bounds;
    double clamped = std::clamp(steer->angle, -b.steer_max, b.steer_max);
    const double step = b.steer_rate_max * ctx.tick;
    clamped = std::clamp(clamped, ctx.current_steer - step, ctx.current_steer + step);
    if (clamped != steer->angle) {
      out.clamped = true;
      out.reason = "steering " + describe(steer->angle) + " clamped to " + describe(clamped);
      steer->angle = clamped;
    }
  } else if (auto* profile = std::get_if<SetSpeedProfile>(&out.instruction.body)) {
    try {
      profile->profile.validate();
    } catch (const std::invalid_argument& e) {
      return reject(e.what());
    }
    if (profile->profile.kind == ProfileKind::SuddenBrake &&
        (!std::isfinite(profile->profile.floor_speed) || !std::isfinite(profile->profile.deceleration) ||
         !std::isfinite(profile->profile.hold_duration) ||
         !std::isfinite(profile->profile.recovery_duration))) {
      return reject("non-finite profile parameter");
    }
  } else if (auto* facility = std::get_if<FacilitySet>(&out.instruction.body)) {
    if (!status_matches_kind(facility->status, i.target.kind)) {
      return reject("status " + std::string(to_string(facility->status)) + " invalid for " +
                    std::string(to_string(i.target.kind)));
    }
  } else if (auto* obstacle = std::get_if<SpawnObstacle>(&out.instruction.body)) {
    if (!std::isfinite(obstacle->point.x) || !std::isfinite(obstacle->point.y)) {
      return reject("non-finite obstacle position");
    }
  }
  return out;
}

std::optional<NativeCommand> to_native_command(const Instruction& i, const DispatchEntry& entry,
                                               const ChannelMap& channels) {
  NativeCommand cmd;
  cmd.target = i.target;
  cmd.issued_at = i.issued_at;
  if (const auto* speed = std::get_if<SetTargetSpeed>(&i.body)) {
    cmd.body = SetTargetSpeed{speed_to_native(speed->speed, entry.transform)};
  } else if (const auto* steer = std::get_if<SetSteering>(&i.body)) {
    cmd.body = *steer;
  } else if (const auto* profile = std::get_if<SetSpeedProfile>(&i.body)) {
    cmd.body = SetSpeedProfile{profile->profile.scaled(1.0 / entry.transform.scale)};
  } else if (const auto* facility = std::get_if<FacilitySet>(&i.body)) {
    const auto channel = channels.channel_of(i.target);
    if (!channel) throw std::out_of_range(to_string(i.target) + " has no control-board channel");
    const ChannelEntry* e = channels.at(*channel);
    cmd.body = BoardByte{status_bit(facility->status) ? e->on_byte : e->off_byte};
  } else {
    return std::nullopt;
  }
  return cmd;
}

// ---------------------------------------------------------------------------

TwinHub::TwinHub(HubConfig config, InteractionLogicTable logic, ChannelMap channels, EventLog* log)
    : config_(std::move(config)), logic_(std::move(logic)), channels_(std::move(channels)), log_(log) {
  config_.fusion.validate();
  if (!(config_.tick > 0.0)) throw std::invalid_argument("hub tick must be positive");
  if (config_.subscriber_capacity == 0) config_.subscriber_capacity = 1;
}

void TwinHub::emit(double t, std::string type, const EntityId* id, std::string detail, double value) {
  if (log_ != nullptr) log_->emit(t, std::move(type), id ? to_string(*id) : std::string{}, std::move(detail), value);
}

void TwinHub::register_entity(const EntityId& id, const DispatchEntry& entry, CommandSink sink) {
  if (table_.count(id)) throw RegistrationError(to_string(id) + " is already registered");
  const auto& b = entry.bounds;
  if (!(b.speed_max > 0.0 && b.steer_max > 0.0 && b.steer_rate_max > 0.0)) {
    throw RegistrationError(to_string(id) + " needs strictly positive command bounds");
  }
  if (!(entry.transform.scale > 0.0)) throw RegistrationError(to_string(id) + " needs a positive scale");
  if (entry.format == CommandFormat::ControlBoard && !channels_.channel_of(id)) {
    throw RegistrationError(to_string(id) + " has no control-board channel");
  }
  table_.emplace(id, entry);
  Slot slot;
  slot.entry = entry;
  slot.sink = std::move(sink);
  slots_.emplace(id, std::move(slot));
}

void TwinHub::set_sink(const EntityId& id, CommandSink sink) {
  auto it = slots_.find(id);
  if (it == slots_.end()) throw RegistrationError(to_string(id) + " is not registered");
  it->second.sink = std::move(sink);
}

IngestResult TwinHub::ingest_state_update(const NativeState& raw) {
  auto it = slots_.find(raw.id);
  if (it == slots_.end()) {
    emit(raw.t, "ingest_rejected", &raw.id, "unknown entity");
    return {false, "unknown entity"};
  }
  Slot& slot = it->second;
  auto last = slot.last_t.find(raw.source);
  if (last != slot.last_t.end() && raw.t < last->second) {
    emit(raw.t, "ingest_rejected", &raw.id, "out-of-order timestamp", last->second - raw.t);
    return {false, "out-of-order timestamp"};
  }
  MixedEntityState mixed;
  try {
    mixed = to_mixed_frame(raw, slot.entry.transform);
  } catch (const FrameConversionError& e) {
    emit(raw.t, "ingest_rejected", &raw.id, e.what());
    return {false, e.what()};
  }
  slot.latest[raw.source] = mixed;
  slot.last_t[raw.source] = raw.t;
  slot.reported = true;
  return {true, {}};
}

void TwinHub::ingest_facility_states(const std::vector<FacilityState>& states) {
  for (const auto& s : states) {
    auto it = facilities_.find(s.id);
    if (it != facilities_.end() && s.t < it->second.t) continue;
    facilities_[s.id] = s;
  }
}

IngestResult TwinHub::ingest_status_frame(std::span<const std::uint8_t> frame, double t) {
  try {
    const ChannelBits bits = parse_status_frame(frame);
    ingest_facility_states(resolve_facilities(bits, channels_, t));
    return {true, {}};
  } catch (const StatusFrameError& e) {
    emit(t, "frame_error", nullptr, e.what());
    return {false, e.what()};
  }
}

MixedSnapshot TwinHub::aggregate_tick(double t_now) {
  std::vector<Retry> retries;
  retries.swap(retries_);
  for (auto& r : retries) {
    Slot& slot = slots_.at(r.instruction.target);
    if (!send(slot, r.instruction)) {
      emit(t_now, "dispatch_dropped", &r.instruction.target,
           std::string(instruction_name(r.instruction.body)) + " dropped after retry");
    }
  }

  MixedSnapshot snap;
  snap.t = t_now;
  snap.seq = ++seq_;
  const double limit = config_.fusion.staleness_limit;
  for (auto& [id, slot] : slots_) {
    if (!slot.reported) continue;
    std::vector<MixedEntityState> fresh;
    double newest_age = std::numeric_limits<double>::infinity();
    for (const auto& [source, obs] : slot.latest) {
      const double age = t_now - obs.t;
      if (age < 0.0 || age > limit) continue;
      fresh.push_back(obs);
      newest_age = std::min(newest_age, age);
    }
    if (fresh.empty()) {
      if (!slot.dropped) {
        slot.dropped = true;
        emit(t_now, "stale", &id, "no fresh state within staleness limit; dropped from snapshot");
      }
      continue;
    }
    slot.dropped = false;
    snap.entities.push_back(fuse_observations(fresh, config_.fusion, t_now));
    if (newest_age > config_.stale_flag_after) snap.stale.push_back(id);
  }
  for (const auto& [id, obstacle] : obstacles_) {
    MixedEntityState o = obstacle;
    o.t = t_now;
    snap.entities.push_back(o);
  }
  for (const auto& [id, f] : facilities_) snap.facilities.push_back(f);

  last_ = snap;
  publish(last_);
  return snap;
}

bool TwinHub::send(Slot& slot, const Instruction& i) {
  auto native = to_native_command(i, slot.entry, channels_);
  if (!native) return true;
  if (!slot.sink) return false;
  return slot.sink(*native);
}

SubmitResult TwinHub::dispatch(const ValidationOutcome& v, double t_now) {
  SubmitResult result;
  result.accepted = true;
  result.clamped = v.clamped;
  result.reason = v.reason;
  result.instruction = v.instruction;
  const Instruction& i = v.instruction;

  if (const auto* spawn = std::get_if<SpawnObstacle>(&i.body)) {
    MixedEntityState o;
    o.id = EntityId{EntityKind::Obstacle, next_obstacle_++};
    o.t = t_now;
    o.x = spawn->point.x;
    o.y = spawn->point.y;
    o.source = Source::Native;
    obstacles_[o.id] = o;
    result.instruction.target = o.id;
    emit(t_now, "obstacle_spawned", &o.id, "(" + describe(o.x) + ", " + describe(o.y) + ")");
    result.dispatched = true;
    return result;
  }

  Slot& slot = slots_.at(i.target);
  if (std::holds_alternative<ReleaseControl>(i.body)) {
    slot.hold_speed = false;
    slot.hold_steer = false;
    result.dispatched = true;
    return result;
  }
  if (i.origin == Origin::Operator) {
    if (std::holds_alternative<SetTargetSpeed>(i.body)) slot.hold_speed = true;
    if (std::holds_alternative<SetSteering>(i.body)) slot.hold_steer = true;
  }

  if (send(slot, i)) {
    result.dispatched = true;
    if (const auto* speed = std::get_if<SetTargetSpeed>(&i.body)) slot.target_speed = speed->speed;
    if (const auto* steer = std::get_if<SetSteering>(&i.body)) slot.steer = steer->angle;
  } else {
    emit(t_now, "dispatch_error", &i.target,
         std::string(instruction_name(i.body)) + " not sent; link down, one retry queued");
    retries_.push_back({i});
  }
  return result;
}

SubmitResult TwinHub::submit(const Instruction& instruction, double t_now) {
  auto slot = slots_.find(instruction.target);
  if (instruction.origin == Origin::Controller && slot != slots_.end()) {
    const bool held = (std::holds_alternative<SetTargetSpeed>(instruction.body) && slot->second.hold_speed) ||
                      (std::holds_alternative<SetSteering>(instruction.body) && slot->second.hold_steer);
    if (held) {
      SubmitResult r;
      r.superseded = true;
      r.reason = "operator holds this vehicle";
      r.instruction = instruction;
      return r;
    }
  }

  ValidationContext ctx;
  ctx.tick = config_.tick;
  ctx.current_steer = slot != slots_.end() ? slot->second.steer : 0.0;
  const ValidationOutcome v = validate_instruction(instruction, table_, ctx);
  if (!v.accepted) {
    emit(t_now, "instruction_rejected", &instruction.target, v.reason);
    SubmitResult r;
    r.reason = v.reason;
    r.instruction = instruction;
    return r;
  }
  if (v.clamped) {
    if (instruction.origin == Origin::Controller) {
      ++controller_clamps_;
    } else {
      emit(t_now, "clamped", &instruction.target, v.reason);
    }
  }
  return dispatch(v, t_now);
}

IntentOutcome TwinHub::submit_intent(const IntentMessage& intent, double t_now) {
  IntentOutcome out;
  Instruction instruction;
  try {
    IntentContext ctx;
    ctx.t_now = t_now;
    ctx.road = config_.road;
    for (const auto& [id, slot] : slots_) {
      if (slot.target_speed) ctx.current_targets[id] = *slot.target_speed;
    }
    instruction = map_intent_to_instruction(intent, logic_, last_, ctx);
  } catch (const IntentError& e) {
    out.reason = e.what();
    audit_.push_back({intent.intent_id, intent.action, false, out.reason});
    emit(t_now, "intent_rejected", nullptr, intent.action + ": " + out.reason,
         static_cast<double>(intent.intent_id));
    return out;
  }

  auto slot = slots_.find(instruction.target);
  if (slot != slots_.end()) {
    if (slot->second.last_operator_t == t_now) {
      emit(t_now, "intent_conflict", &instruction.target,
           "several operator intents in one tick; applied in arrival order");
    }
    slot->second.last_operator_t = t_now;
  }

  const SubmitResult r = submit(instruction, t_now);
  out.accepted = r.accepted;
  out.clamped = r.clamped;
  out.reason = r.reason;
  if (r.accepted) out.instruction = r.instruction;
  audit_.push_back({intent.intent_id, intent.action, r.accepted, r.reason});
  if (r.accepted) {
    emit(t_now, "instruction_ack", &r.instruction.target,
         intent.action + (r.clamped ? " (clamped: " + r.reason + ")" : std::string{}),
         static_cast<double>(intent.intent_id));
  } else {
    emit(t_now, "intent_rejected", &instruction.target, intent.action + ": " + r.reason,
         static_cast<double>(intent.intent_id));
  }
  return out;
}

MixedSnapshot TwinHub::filtered(const MixedSnapshot& s, const std::set<EntityKind>& filter) {
  if (filter.empty()) return s;
  MixedSnapshot out;
  out.t = s.t;
  out.seq = s.seq;
  for (const auto& e : s.entities) {
    if (filter.count(e.id.kind)) out.entities.push_back(e);
  }
  for (const auto& f : s.facilities) {
    if (filter.count(f.id.kind)) out.facilities.push_back(f);
  }
  for (const auto& id : s.stale) {
    if (filter.count(id.kind)) out.stale.push_back(id);
  }
  return out;
}

void TwinHub::publish(const MixedSnapshot& snapshot) {
  for (auto& [id, sub] : subscribers_) {
    if (!sub.open) continue;
    if (sub.queue.size() >= sub.capacity) {
      sub.queue.clear();
      sub.queue.push_back({StreamItem::Kind::Overflow, snapshot.seq, {}});
      sub.open = false;
      continue;
    }
    sub.queue.push_back({StreamItem::Kind::Snapshot, snapshot.seq, filtered(snapshot, sub.filter)});
  }
}

SubscriptionId TwinHub::subscribe(std::set<EntityKind> filter, std::size_t capacity) {
  Subscriber sub;
  sub.filter = std::move(filter);
  sub.capacity = capacity == 0 ? config_.subscriber_capacity : capacity;
  sub.queue.push_back({StreamItem::Kind::Resync, last_.seq, {}});
  if (last_.seq > 0) {
    sub.queue.push_back({StreamItem::Kind::Snapshot, last_.seq, filtered(last_, sub.filter)});
  }
  const SubscriptionId id = next_subscription_++;
  subscribers_.emplace(id, std::move(sub));
  return id;
}

std::vector<StreamItem> TwinHub::drain(SubscriptionId id) {
  auto it = subscribers_.find(id);
  if (it == subscribers_.end()) return {};
  std::vector<StreamItem> out(std::make_move_iterator(it->second.queue.begin()),
                              std::make_move_iterator(it->second.queue.end()));
  it->second.queue.clear();
  return out;
}

bool TwinHub::subscription_open(SubscriptionId id) const {
  auto it = subscribers_.find(id);
  return it != subscribers_.end() && it->second.open;
}

void TwinHub::unsubscribe(SubscriptionId id) { subscribers_.erase(id); }

std::optional<double> TwinHub::commanded_speed(const EntityId& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) return std::nullopt;
  return it->second.target_speed;
}

double TwinHub::current_steer(const EntityId& id) const {
  auto it = slots_.find(id);
  return it == slots_.end() ? 0.0 : it->second.steer;
}

bool TwinHub::operator_holds(const EntityId& id) const {
  auto it = slots_.find(id);
  return it != slots_.end() && (it->second.hold_speed || it->second.hold_steer);
}

}  // namespace mixtwin
