#include "mixtwin/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixtwin/errors.hpp"

namespace mixtwin {

using nlohmann::json;

namespace {

Rng process_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu, stream};
  return Rng(seq);
}

}  // namespace

Simulation::Simulation(ScenarioConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  const auto diagnostics = validate_config(config_);
  for (const auto& d : diagnostics) {
    if (d.severity == Diagnostic::Severity::Error) throw ConfigError(d.path + ": " + d.message);
  }
  build();
}

Simulation::~Simulation() = default;

int Simulation::uplink(Realm realm) const {
  switch (realm) {
    case Realm::EmulatedPhysical: return config_.assignment.physical_up;
    case Realm::Virtual: return config_.assignment.virtual_up;
    case Realm::ExternalVirtual: return config_.assignment.external_up;
  }
  return config_.assignment.virtual_up;
}

int Simulation::downlink(Realm realm) const {
  switch (realm) {
    case Realm::EmulatedPhysical: return config_.assignment.physical_down;
    case Realm::Virtual: return config_.assignment.virtual_down;
    case Realm::ExternalVirtual: return config_.assignment.external_down;
  }
  return config_.assignment.virtual_down;
}

void Simulation::build() {
  ticks_ = config_.ticks();
  network_ = std::make_unique<Network>(scheduler_, seed_, &events_);
  for (const auto& l : config_.links) network_->add_link(l);

  HubConfig hc;
  hc.tick = config_.tick;
  hc.fusion = config_.fusion;
  hc.stale_flag_after = config_.stale_flag_after;
  hc.road = config_.road;
  hc.subscriber_capacity = config_.subscriber_capacity;
  hub_ = std::make_unique<TwinHub>(hc, config_.logic, config_.channels, &events_);
  track_ = Path::oval(config_.track.center, config_.track.straight, config_.track.radius);

  const std::size_t n = config_.roster.size();
  vehicles_.resize(n);
  controllers_.resize(n);
  frozen_.assign(n, 0);
  fired_.assign(config_.perturbations.size(), 0);

  const double cruise = config_.cacc.cruise_speed;
  const double spacing = cacc_desired_gap(cruise, config_.cacc);
  const double s_head = spacing * static_cast<double>(n);
  DispatchEntry kinematic;
  kinematic.bounds = config_.vehicle.bounds;

  for (std::size_t i = 0; i < n; ++i) {
    const RosterEntry& r = config_.roster[i];
    controllers_[i].role = r.role;
    const double s = track_.wrap(s_head - spacing * static_cast<double>(i));
    const Point2 p = track_.point_at(s);
    MixedEntityState mixed;
    mixed.id = r.id;
    mixed.x = p.x;
    mixed.y = p.y;
    mixed.heading = track_.heading_at(s);
    mixed.speed = cruise;

    if (r.realm == Realm::ExternalVirtual) {
      ExternalSlot slot;
      slot.roster_index = i;
      slot.client = std::make_unique<ExternalVehicleClient>(
          r.id, BicycleState{mixed.x, mixed.y, mixed.heading, cruise, config_.vehicle.wheelbase, 0.0, 0.0},
          config_.vehicle.accel_limit);
      const int down = downlink(r.realm);
      const std::size_t idx = externals_.size();
      slot.session = std::make_unique<WireSession>(*hub_, [this, down, idx](const std::string& line) {
        if (!network_->link_up(down)) return false;
        network_->deliver(
            down, [this, idx, line] { externals_[idx].client->on_line(line, scheduler_.now()); }, "frame");
        return true;
      });
      externals_.push_back(std::move(slot));
      continue;
    }

    VehicleProcessConfig vc;
    vc.id = r.id;
    vc.realm = r.realm;
    vc.sensor = config_.sensor;
    vc.accel_limit = config_.vehicle.accel_limit;
    vc.fail_safe_after = config_.vehicle.fail_safe_after;
    vc.brake_on_command_loss = config_.vehicle.brake_on_command_loss;
    const FrameTransform tr = realm_transform(r.realm);
    const NativeState native = from_mixed_frame(mixed, tr);
    const BicycleState b{native.x, native.y, native.heading, native.speed, config_.vehicle.wheelbase / tr.scale,
                         0.0, 0.0};
    vehicles_[i] = std::make_unique<VehicleProcess>(vc, b, process_rng(seed_, static_cast<std::uint32_t>(i)));

    DispatchEntry entry = kinematic;
    entry.transform = tr;
    const int down = downlink(r.realm);
    hub_->register_entity(r.id, entry, [this, i, down](const NativeCommand& cmd) {
      if (!network_->link_up(down)) return false;
      network_->deliver(down, [this, i, cmd] { vehicles_[i]->receive(cmd, scheduler_.now()); }, "command");
      return true;
    });
  }

  rsu_ = std::make_unique<RsuProcess>(config_.channels, config_.gate_travel_time);
  rsu_session_ = std::make_unique<WireSession>(*hub_, [](const std::string&) { return true; });
  register_facilities();

  detector_ = std::make_unique<CornerCaseDetector>(config_.thresholds, n > 0 ? n - 1 : 0);
  record_.roster.clear();
  for (const auto& r : config_.roster) {
    record_.roster.push_back(r.id);
    record_.roles.push_back(r.role);
  }
  record_.tick = config_.tick;
  record_.cruise_speed = cruise;
  for (const auto& p : config_.perturbations) {
    if (p.trigger != Perturbation::Trigger::AtTime) continue;
    const double end = p.profile.end_time(cruise);
    record_.perturbation_windows.emplace_back(p.profile.t0, std::isfinite(end) ? end + config_.settle_time : end);
  }

  // Initial reports at t = 0 so the first snapshot already holds the platoon.
  for (std::size_t i = 0; i < n; ++i) {
    if (!vehicles_[i]) continue;
    NativeState s = vehicles_[i]->truth_state(0.0);
    if (vehicles_[i]->realm() == Realm::EmulatedPhysical) s.source = Source::Onboard;
    const int up = uplink(vehicles_[i]->realm());
    network_->deliver(up, [this, s] { hub_->ingest_state_update(s); }, "state");
  }
  for (auto& x : externals_) {
    if (config_.roster[x.roster_index].join_time <= 0.0) {
      x.connected = true;
      const std::size_t idx = static_cast<std::size_t>(&x - externals_.data());
      const std::string line = x.client->register_line();
      network_->deliver(
          uplink(Realm::ExternalVirtual),
          [this, idx, line] { externals_[idx].session->handle_line(line, scheduler_.now()); }, "register");
    }
  }
  const std::string status = rsu_->poll(0.0);
  network_->deliver(
      config_.assignment.rsu_up, [this, status] { rsu_session_->handle_line(status, scheduler_.now()); }, "status");
}

void Simulation::register_facilities() {
  DispatchEntry entry;
  entry.format = CommandFormat::ControlBoard;
  entry.bounds = config_.vehicle.bounds;
  const int down = config_.assignment.rsu_down;
  for (const auto& [channel, e] : config_.channels.entries()) {
    hub_->register_entity(e.facility, entry, [this, down](const NativeCommand& cmd) {
      const auto* byte = std::get_if<BoardByte>(&cmd.body);
      if (byte == nullptr) return false;
      if (!network_->link_up(down)) return false;
      const std::string line =
          encode_frame(FacilityFrame{FacilityFrame::Direction::Command, cmd.issued_at, {byte->value}});
      network_->deliver(
          down,
          [this, line] {
            try {
              rsu_->handle_line(line, scheduler_.now());
            } catch (const ProtocolError& err) {
              events_.emit(scheduler_.now(), "protocol_error", "rsu", err.what());
            }
          },
          "board command");
      return true;
    });
  }
}

VehicleProcess* Simulation::vehicle(const EntityId& id) {
  for (auto& v : vehicles_) {
    if (v && v->id() == id) return v.get();
  }
  return nullptr;
}

ExternalVehicleClient* Simulation::external(const EntityId& id) {
  for (auto& x : externals_) {
    if (x.client->id() == id) return x.client.get();
  }
  return nullptr;
}

MixedEntityState Simulation::truth(std::size_t i) const {
  const double t = now();
  if (vehicles_.at(i)) return to_mixed_frame(vehicles_[i]->truth_state(t), vehicles_[i]->transform());
  for (const auto& x : externals_) {
    if (x.roster_index == i) return to_mixed_frame(x.client->truth_state(t), FrameTransform::identity());
  }
  throw std::out_of_range("roster index out of range");
}

void Simulation::emit_reports(double t) {
  const double dt = config_.tick;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (!vehicles_[i]) continue;
    auto report = vehicles_[i]->step(t, dt, &events_);
    if (!report) continue;
    const int up = uplink(vehicles_[i]->realm());
    const double offset = config_.roster[i].phase_offset;
    NativeState s = *report;
    auto send = [this, up, s] { network_->deliver(up, [this, s] { hub_->ingest_state_update(s); }, "state"); };
    if (offset > 0.0) {
      scheduler_.schedule(t + offset, send);
    } else {
      send();
    }
  }

  for (std::size_t idx = 0; idx < externals_.size(); ++idx) {
    ExternalSlot& x = externals_[idx];
    const int up = uplink(Realm::ExternalVirtual);
    if (!x.connected && t + 1e-9 >= config_.roster[x.roster_index].join_time) {
      x.connected = true;
      const std::string line = x.client->register_line();
      network_->deliver(up, [this, idx, line] { externals_[idx].session->handle_line(line, scheduler_.now()); },
                        "register");
    }
    auto line = x.client->step(t, dt);
    if (line && x.connected) {
      std::string l = std::move(*line);
      network_->deliver(up, [this, idx, l] { externals_[idx].session->handle_line(l, scheduler_.now()); }, "state");
    }
  }

  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config_.rsu_poll_period / config_.tick)));
  if (k_ % every == 0) {
    const std::string status = rsu_->poll(t);
    network_->deliver(
        config_.assignment.rsu_up, [this, status] { rsu_session_->handle_line(status, scheduler_.now()); },
        "status");
  } else {
    rsu_->board().advance(t);
  }
}

void Simulation::run_controllers(double t) {
  const MixedSnapshot& snap = hub_->last_snapshot();
  const std::size_t n = config_.roster.size();
  std::vector<const MixedEntityState*> states(n, nullptr);
  std::vector<PathProjection> proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    states[i] = snap.find(config_.roster[i].id);
    if (states[i]) proj[i] = track_.project({states[i]->x, states[i]->y});
  }

  for (std::size_t i = 0; i < n; ++i) {
    Controller& c = controllers_[i];
    if (c.role == Role::LiveHuman || states[i] == nullptr) continue;
    const MixedEntityState& own = *states[i];
    const EntityId& id = config_.roster[i].id;

    const BicycleState b{own.x, own.y, own.heading, own.speed, config_.vehicle.wheelbase, 0.0, 0.0};
    const LateralCommand lat =
        preview_lateral(b, track_, scheduled_lookahead(own.speed, config_.lateral), config_.lateral);
    if (lat.off_path != c.off_path) {
      c.off_path = lat.off_path;
      if (lat.off_path) events_.emit(t, "off_path", to_string(id), "farther than the recovery threshold from the path");
    }
    hub_->submit({id, SetSteering{lat.steer}, t, Origin::Controller}, t);

    double target = config_.cacc.cruise_speed;
    if (c.role != Role::Head) {
      double gap = std::numeric_limits<double>::infinity();
      double pred_speed = own.speed;
      double pred_accel = 0.0;
      if (i > 0 && states[i - 1]) {
        gap = track_.forward_distance(proj[i].s, proj[i - 1].s);
        pred_speed = states[i - 1]->speed;
        pred_accel = states[i - 1]->accel;
      }
      if (!c.initialised) {
        c.v_cmd = own.speed;
        c.initialised = true;
      }
      const double a = c.role == Role::CACC
                           ? cacc_longitudinal(gap, own.speed, pred_speed, pred_accel, config_.cacc)
                           : hdv_step(t, gap, own.speed, pred_speed, c.history, config_.hdv).accel;
      c.v_cmd = std::clamp(c.v_cmd + a * config_.tick, 0.0, config_.vehicle.bounds.speed_max);
      target = c.v_cmd;
    }
    hub_->submit({id, SetTargetSpeed{target}, t, Origin::Controller}, t);
  }
}

void Simulation::fire_perturbations(double t) {
  for (std::size_t j = 0; j < config_.perturbations.size(); ++j) {
    const Perturbation& p = config_.perturbations[j];
    if (fired_[j] || p.trigger != Perturbation::Trigger::AtTime || t + 1e-9 < p.profile.t0) continue;
    fired_[j] = 1;
    const EntityId target = p.target ? *p.target : config_.head().id;
    const SubmitResult r = hub_->submit({target, SetSpeedProfile{p.profile}, t, Origin::Scenario}, t);
    events_.emit(t, "perturbation", to_string(target),
                 r.accepted ? "profile applied" : "profile rejected: " + r.reason, p.profile.t0);
  }
}

void Simulation::freeze(std::size_t i) {
  if (frozen_[i]) return;
  frozen_[i] = 1;
  if (vehicles_[i]) {
    vehicles_[i]->freeze();
    return;
  }
  for (auto& x : externals_) {
    if (x.roster_index == i) x.client->freeze();
  }
}

void Simulation::record_metrics(double t) {
  const std::size_t n = config_.roster.size();
  std::vector<double> speed(n), accel(n), s(n);
  std::vector<double> gap(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const MixedEntityState m = truth(i);
    speed[i] = m.speed;
    accel[i] = m.accel;
    s[i] = track_.project({m.x, m.y}).s;
  }
  for (std::size_t i = 1; i < n; ++i) {
    gap[i - 1] = track_.forward_distance(s[i], s[i - 1]);
    for (auto& e : detector_->observe(t, i - 1, config_.roster[i].id, gap[i - 1])) {
      const bool collision = e.type == "collision";
      events_.emit(std::move(e));
      if (collision && !(frozen_[i] && frozen_[i - 1])) {
        freeze(i);
        freeze(i - 1);
        events_.emit(t, "freeze", to_string(config_.roster[i].id),
                     "collision pair frozen with " + to_string(config_.roster[i - 1].id), gap[i - 1]);
      }
    }
  }
  record_.t.push_back(t);
  record_.speed.push_back(std::move(speed));
  record_.accel.push_back(std::move(accel));
  record_.gap.push_back(std::move(gap));
}

Simulation::ClientId Simulation::connect_client(ClientSink to_client, bool stream_snapshots) {
  const ClientId id = clients_.size();
  Client c;
  c.sink = std::move(to_client);
  c.events_sent = events_.events().size();
  const int down = config_.assignment.hmi_down;
  c.session = std::make_unique<WireSession>(*hub_, [this, id, down](const std::string& line) {
    if (!clients_[id].open || !network_->link_up(down)) return false;
    network_->deliver(down, [this, id, line] {
      if (clients_[id].open) clients_[id].sink(line);
    }, "frame");
    return true;
  });
  if (stream_snapshots) c.session->subscribe();
  clients_.push_back(std::move(c));
  return id;
}

void Simulation::client_send(ClientId id, std::string line) {
  if (id >= clients_.size() || !clients_[id].open) return;
  network_->deliver(config_.assignment.hmi_up, [this, id, line = std::move(line)] {
    if (clients_[id].open) clients_[id].inbox.push_back(line);
  }, "frame");
}

void Simulation::disconnect_client(ClientId id) {
  if (id >= clients_.size() || !clients_[id].open) return;
  clients_[id].open = false;
  clients_[id].session.reset();
  clients_[id].inbox.clear();
}

void Simulation::serve_clients(double t) {
  for (auto& c : clients_) {
    if (!c.open) continue;
    const auto& all = events_.events();
    for (; c.events_sent < all.size(); ++c.events_sent) c.session->send_event(all[c.events_sent]);
    c.session->flush_stream();
  }
  (void)t;
}

void Simulation::abort(const std::string& reason) {
  if (aborted_) return;
  aborted_ = true;
  record_.partial = true;
  record_.partial_reason = reason;
  events_.emit(now(), "run_aborted", {}, reason);
}

void Simulation::step() {
  if (done() || aborted_) return;
  ++k_;
  const double t = now();
  scheduler_.run_until(t);
  emit_reports(t);
  hub_->aggregate_tick(t);
  for (auto& c : clients_) {
    if (!c.open) continue;
    std::vector<std::string> inbox;
    inbox.swap(c.inbox);
    for (const auto& line : inbox) c.session->handle_line(line, t);
  }
  run_controllers(t);
  fire_perturbations(t);
  record_metrics(t);
  serve_clients(t);
}

MetricsRecord Simulation::finish() {
  if (!done() && !aborted_) {
    record_.partial = true;
    record_.partial_reason = "stopped after " + std::to_string(k_) + " of " + std::to_string(ticks_) + " ticks";
  }
  MetricsRecord out = record_;
  out.events = events_.events();
  return out;
}

json Simulation::report(const MetricsRecord& r) const {
  json j;
  j["scenario"] = config_.name;
  j["seed"] = seed_;
  j["tick"] = config_.tick;
  j["ticks"] = r.rows();
  j["duration"] = r.rows() > 0 ? r.t.back() : 0.0;
  j["partial"] = r.partial;
  if (r.partial) j["partial_reason"] = r.partial_reason;

  std::map<std::string, std::size_t> counts;
  for (const auto& e : r.events) ++counts[e.type];
  j["event_counts"] = counts;
  j["corner_cases"] = {{"gap_warn", counts["gap_warn"]}, {"collision", counts["collision"]}};

  try {
    j["stability"] = stability_to_json(string_stability_report(r));
  } catch (const ReportError& e) {
    j["stability"] = {{"error", e.what()}};
  }
  j["head_profile_error"] = r.rows() > 0 ? head_profile_error(r, config_) : 0.0;

  json links = json::object();
  for (int id : network_->link_ids()) {
    try {
      const LinkStats s = network_->link_stats(id);
      links[std::to_string(id)] = {{"mean_ms", s.mean}, {"std_ms", s.std}, {"p99_ms", s.p99},
                                   {"count", s.count},  {"drops", s.drops}};
    } catch (const std::exception&) {
    }
  }
  j["links"] = links;
  j["controller_clamps"] = hub_->controller_clamps();
  j["snapshots"] = hub_->last_snapshot().seq;
  return j;
}

MetricsRecord run_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  return run_with_report(config, seed).record;
}

RunOutput run_with_report(const ScenarioConfig& config, std::uint64_t seed) {
  Simulation sim(config, seed);
  while (!sim.done()) {
    try {
      sim.step();
    } catch (const std::exception& e) {
      sim.abort(e.what());
      break;
    }
  }
  RunOutput out;
  out.record = sim.finish();
  out.report = sim.report(out.record);
  return out;
}

double head_profile_error(const MetricsRecord& r, const ScenarioConfig& cfg) {
  const EntityId head = cfg.head().id;
  const std::string head_name = to_string(head);
  std::vector<const SpeedProfile*> profiles;
  for (const auto& p : cfg.perturbations) {
    if (p.trigger == Perturbation::Trigger::AtTime && (!p.target || *p.target == head)) profiles.push_back(&p.profile);
  }
  std::sort(profiles.begin(), profiles.end(), [](auto* a, auto* b) { return a->t0 < b->t0; });
  std::vector<double> clamp_times;
  for (const auto& e : r.events) {
    if (e.type == "clamped" && e.entity == head_name) clamp_times.push_back(e.t);
  }
  std::size_t head_index = 0;
  for (std::size_t i = 0; i < r.roster.size(); ++i) {
    if (r.roster[i] == head) head_index = i;
  }
  const double cruise = cfg.cacc.cruise_speed;
  double worst = 0.0;
  for (std::size_t row = 0; row < r.rows(); ++row) {
    const double t = r.t[row];
    bool skip = false;
    for (double c : clamp_times) skip = skip || (t >= c && t <= c + 0.5);
    if (skip) continue;
    double expected = cruise;
    for (const SpeedProfile* p : profiles) {
      if (t >= p->t0 && t <= p->end_time(cruise)) expected = evaluate_profile(*p, t, cruise);
    }
    worst = std::max(worst, std::abs(r.speed[row][head_index] - expected));
  }
  return worst;
}

double cross_correlation_lag(const std::vector<double>& a, const std::vector<double>& b, double dt,
                             double max_lag) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2 || !(dt > 0.0)) throw std::invalid_argument("cross_correlation_lag: traces too short");
  const auto max_k = std::min(n - 2, static_cast<std::size_t>(std::llround(max_lag / dt)));
  std::size_t best = 0;
  double best_c = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= max_k; ++k) {
    const std::size_t m = n - k;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      ma += a[i];
      mb += b[i + k];
    }
    ma /= static_cast<double>(m);
    mb /= static_cast<double>(m);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double da = a[i] - ma, db = b[i + k] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
    const double c = saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
    if (c > best_c) {
      best_c = c;
      best = k;
    }
  }
  return static_cast<double>(best) * dt;
}

}  // namespace mixtwin
