#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mixtwin/emulation.hpp"
#include "mixtwin/events.hpp"
#include "mixtwin/fusion.hpp"
#include "mixtwin/instruction.hpp"

namespace mixtwin {

struct MixedSnapshot {
  double t = 0.0;
  std::uint64_t seq = 0;
  std::vector<MixedEntityState> entities;
  std::vector<FacilityState> facilities;
  std::vector<EntityId> stale;  // present but not refreshed recently

  const MixedEntityState* find(const EntityId& id) const;
  const FacilityState* find_facility(const EntityId& id) const;
};

// Control-board command byte sent to the roadside unit.
struct BoardByte {
  std::uint8_t value = 0;
  bool operator==(const BoardByte&) const = default;
};

using NativeCommandBody = std::variant<SetTargetSpeed, SetSteering, SetSpeedProfile, BoardByte>;

/// Command in the target's own units, ready for its link.
struct NativeCommand {
  EntityId target;
  double issued_at = 0.0;
  NativeCommandBody body;
};

// ---------------------------------------------------------------------------
// Instruction pipeline, usable without a hub instance.

struct IntentContext {
  double t_now = 0.0;
  RoadBounds road;
  // Last validated target speed per vehicle, mixed space.
  std::map<EntityId, double> current_targets;
};

/// Instantiates the table template for the intent's action. Origin is
/// Operator. Throws IntentError for unknown actions or unresolvable focus.
Instruction map_intent_to_instruction(const IntentMessage& intent,
                                      const InteractionLogicTable& table,
                                      const MixedSnapshot& snapshot, const IntentContext& ctx);

struct ValidationContext {
  double tick = 0.02;
  double current_steer = 0.0;  // last dispatched steering of the target, rad
};

struct ValidationOutcome {
  bool accepted = false;
  bool clamped = false;
  std::string reason;  // rejection reason or clamp description
  Instruction instruction;
};

/// Clamps speeds to [0, speed_max], steering to +-steer_max and to a
/// steer_rate_max * tick step from the current angle; rejects kind/target
/// mismatches, unregistered targets, and non-finite parameters. Idempotent.
ValidationOutcome validate_instruction(const Instruction& instruction, const DispatchTable& table,
                                       const ValidationContext& ctx);

/// Converts a validated instruction into native units and format. Speeds
/// and profile magnitudes divide by the transform scale; facility commands
/// become control-board bytes. Returns nullopt for hub-internal kinds.
std::optional<NativeCommand> to_native_command(const Instruction& instruction,
                                               const DispatchEntry& entry,
                                               const ChannelMap& channels);

// ---------------------------------------------------------------------------

struct HubConfig {
  double tick = 0.02;
  FusionPolicy fusion;
  double stale_flag_after = 0.1;  // s without fresh data before an entity is marked stale
  RoadBounds road;
  std::size_t subscriber_capacity = 256;
};

/// Sends one native command on the entity's link; false when the link is down.
using CommandSink = std::function<bool(const NativeCommand&)>;

struct IngestResult {
  bool accepted = false;
  std::string reason;
};

struct SubmitResult {
  bool accepted = false;
  bool clamped = false;
  bool dispatched = false;
  bool superseded = false;  // controller command ignored while an operator holds the vehicle
  std::string reason;
  Instruction instruction;
};

struct IntentOutcome {
  bool accepted = false;
  bool clamped = false;
  std::string reason;
  std::optional<Instruction> instruction;
};

struct StreamItem {
  enum class Kind { Resync, Snapshot, Overflow };
  Kind kind = Kind::Snapshot;
  std::uint64_t seq = 0;
  MixedSnapshot snapshot;
};

using SubscriptionId = std::uint64_t;

struct AuditRecord {
  std::uint64_t intent_id = 0;
  std::string action;
  bool accepted = false;
  std::string reason;
};

/// The mixed testing environment: ingests native state streams, aggregates
/// them once per tick into a mixed snapshot, and validates and dispatches
/// instructions through the entity-instruction table. Single-threaded;
/// callers drive it from one event loop.
class TwinHub {
 public:
  TwinHub(HubConfig config, InteractionLogicTable logic, ChannelMap channels,
          EventLog* log = nullptr);

  // Throws RegistrationError for duplicate ids or non-positive bounds.
  void register_entity(const EntityId& id, const DispatchEntry& entry, CommandSink sink = {});
  bool is_registered(const EntityId& id) const { return table_.count(id) != 0; }
  const DispatchTable& dispatch_table() const { return table_; }
  void set_sink(const EntityId& id, CommandSink sink);

  IngestResult ingest_state_update(const NativeState& raw);
  void ingest_facility_states(const std::vector<FacilityState>& states);
  IngestResult ingest_status_frame(std::span<const std::uint8_t> frame, double t);

  MixedSnapshot aggregate_tick(double t_now);
  const MixedSnapshot& last_snapshot() const { return last_; }

  SubmitResult submit(const Instruction& instruction, double t_now);
  IntentOutcome submit_intent(const IntentMessage& intent, double t_now);

  SubscriptionId subscribe(std::set<EntityKind> filter = {}, std::size_t capacity = 0);
  std::vector<StreamItem> drain(SubscriptionId id);
  bool subscription_open(SubscriptionId id) const;
  void unsubscribe(SubscriptionId id);

  std::optional<double> commanded_speed(const EntityId& id) const;
  double current_steer(const EntityId& id) const;
  bool operator_holds(const EntityId& id) const;
  const std::vector<AuditRecord>& audit() const { return audit_; }
  std::size_t controller_clamps() const { return controller_clamps_; }
  const InteractionLogicTable& logic() const { return logic_; }
  const ChannelMap& channels() const { return channels_; }
  const HubConfig& config() const { return config_; }

 private:
  struct Slot {
    DispatchEntry entry;
    CommandSink sink;
    std::map<Source, MixedEntityState> latest;
    std::map<Source, double> last_t;
    bool reported = false;
    bool dropped = false;
    double steer = 0.0;
    std::optional<double> target_speed;
    bool hold_speed = false;
    bool hold_steer = false;
    double last_operator_t = -1.0;
  };

  struct Subscriber {
    std::set<EntityKind> filter;
    std::size_t capacity;
    std::deque<StreamItem> queue;
    bool open = true;
  };

  struct Retry {
    Instruction instruction;
  };

  SubmitResult dispatch(const ValidationOutcome& validated, double t_now);
  bool send(Slot& slot, const Instruction& instruction);
  void emit(double t, std::string type, const EntityId* id, std::string detail, double value = 0.0);
  void publish(const MixedSnapshot& snapshot);
  static MixedSnapshot filtered(const MixedSnapshot& s, const std::set<EntityKind>& filter);

  HubConfig config_;
  InteractionLogicTable logic_;
  ChannelMap channels_;
  EventLog* log_;
  DispatchTable table_;
  std::map<EntityId, Slot> slots_;
  std::map<EntityId, FacilityState> facilities_;
  std::map<EntityId, MixedEntityState> obstacles_;
  std::map<SubscriptionId, Subscriber> subscribers_;
  SubscriptionId next_subscription_ = 1;
  std::vector<Retry> retries_;
  std::vector<AuditRecord> audit_;
  MixedSnapshot last_;
  std::uint64_t seq_ = 0;
  std::size_t controller_clamps_ = 0;
  std::uint32_t next_obstacle_ = 0;
};

}  // namespace mixtwin
