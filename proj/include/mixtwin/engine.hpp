#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtwin/config.hpp"
#include "mixtwin/entity_sim.hpp"
#include "mixtwin/hub.hpp"
#include "mixtwin/metrics.hpp"
#include "mixtwin/net.hpp"
#include "mixtwin/path.hpp"
#include "mixtwin/wire.hpp"

namespace mixtwin {

/// One experiment on the virtual clock. Each call to step() advances every
/// process by one tick in a fixed order: link deliveries, entity steps and
/// reports, hub aggregation, queued operator frames, cloud controllers,
/// scripted perturbations, then ground-truth metrics.
class Simulation {
 public:
  using ClientId = std::size_t;
  using ClientSink = std::function<void(const std::string&)>;

  Simulation(ScenarioConfig config, std::uint64_t seed);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void step();
  bool done() const { return k_ >= ticks_; }
  std::size_t tick_index() const { return k_; }
  std::size_t total_ticks() const { return ticks_; }
  double now() const { return static_cast<double>(k_) * config_.tick; }

  // Operator connection over the HMI links. Frames from the client are
  // applied at the next tick boundary; replies, snapshots and events reach
  // `to_client` after the downlink delay.
  ClientId connect_client(ClientSink to_client, bool stream_snapshots = true);
  void client_send(ClientId client, std::string line);
  void disconnect_client(ClientId client);

  // Marks the record partial and stops further ticks.
  void abort(const std::string& reason);

  const ScenarioConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  TwinHub& hub() { return *hub_; }
  Network& network() { return *network_; }
  Scheduler& scheduler() { return scheduler_; }
  EventLog& events() { return events_; }
  const Path& track() const { return track_; }
  const MetricsRecord& record() const { return record_; }
  VehicleProcess* vehicle(const EntityId& id);
  ExternalVehicleClient* external(const EntityId& id);
  RsuProcess& rsu() { return *rsu_; }

  // Ground-truth mixed-space state of roster vehicle i.
  MixedEntityState truth(std::size_t roster_index) const;

  /// Record with events attached; corner-case detection already ran online.
  MetricsRecord finish();
  nlohmann::json report(const MetricsRecord& record) const;

 private:
  struct Controller {
    Role role = Role::CACC;
    double v_cmd = 0.0;
    bool initialised = false;
    bool off_path = false;
    HdvHistory history;
  };
  struct Client {
    std::unique_ptr<WireSession> session;
    ClientSink sink;
    std::vector<std::string> inbox;
    std::size_t events_sent = 0;
    bool open = true;
  };
  struct ExternalSlot {
    std::size_t roster_index = 0;
    std::unique_ptr<ExternalVehicleClient> client;
    std::unique_ptr<WireSession> session;
    bool connected = false;
  };

  void build();
  void register_facilities();
  void emit_reports(double t);
  void run_controllers(double t);
  void fire_perturbations(double t);
  void record_metrics(double t);
  void serve_clients(double t);
  void freeze(std::size_t roster_index);
  int uplink(Realm realm) const;
  int downlink(Realm realm) const;

  ScenarioConfig config_;
  std::uint64_t seed_;
  std::size_t ticks_ = 0;
  std::size_t k_ = 0;
  bool aborted_ = false;
  EventLog events_;
  Scheduler scheduler_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<TwinHub> hub_;
  Path track_;
  std::unique_ptr<RsuProcess> rsu_;
  std::unique_ptr<WireSession> rsu_session_;
  std::vector<std::unique_ptr<VehicleProcess>> vehicles_;  // by roster index, null for external
  std::vector<ExternalSlot> externals_;
  std::vector<Controller> controllers_;
  std::vector<char> fired_;
  std::vector<char> frozen_;
  std::vector<Client> clients_;
  std::unique_ptr<CornerCaseDetector> detector_;
  MetricsRecord record_;
  double next_rsu_poll_ = 0.0;
};

MetricsRecord run_scenario(const ScenarioConfig& config, std::uint64_t seed);

struct RunOutput {
  MetricsRecord record;
  nlohmann::json report;
};

RunOutput run_with_report(const ScenarioConfig& config, std::uint64_t seed);

/// Largest |head speed - scripted profile| over the record, skipping ticks
/// inside clamp events.
double head_profile_error(const MetricsRecord& record, const ScenarioConfig& config);

/// Lag in seconds maximising the Pearson correlation between `leader` and
/// `follower` shifted by the lag, over lags in [0, max_lag]; positive when
/// `follower` trails `leader`.
double cross_correlation_lag(const std::vector<double>& leader, const std::vector<double>& follower, double dt,
                             double max_lag);

}  // namespace mixtwin
