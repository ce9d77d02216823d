#include "mixtwin/config.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mixtwin/errors.hpp"
#include "mixtwin/wire.hpp"

namespace mixtwin {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Role, std::string_view>, 4> kRoleNames{{
    {Role::Head, "Head"},
    {Role::CACC, "CACC"},
    {Role::HDV, "HDV"},
    {Role::LiveHuman, "LiveHuman"},
}};

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) bad(join(path, key), "unknown key");
  }
}

void read(const json& j, const char* key, const std::string& path, double& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_number()) bad(join(path, key), "expected a number");
  out = v.get<double>();
}

void read(const json& j, const char* key, const std::string& path, bool& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_boolean()) bad(join(path, key), "expected a boolean");
  out = v.get<bool>();
}

void read(const json& j, const char* key, const std::string& path, std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_string()) bad(join(path, key), "expected a string");
  out = v.get<std::string>();
}

void read(const json& j, const char* key, const std::string& path, int& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_number_integer()) bad(join(path, key), "expected an integer");
  out = v.get<int>();
}

void read(const json& j, const char* key, const std::string& path, std::size_t& out) {
  if (!j.contains(key)) return;
  const json& v = j[key];
  if (!v.is_number_unsigned()) bad(join(path, key), "expected a non-negative integer");
  out = v.get<std::size_t>();
}

EntityId read_id(const json& j, const char* key, const std::string& path) {
  std::string text;
  if (!j.contains(key)) bad(join(path, key), "required");
  read(j, key, path, text);
  auto id = parse_entity_id(text);
  if (!id) bad(join(path, key), "'" + text + "' is not an entity id (Kind#N)");
  return *id;
}

std::uint8_t read_byte(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) bad(join(path, key), "required");
  const json& v = j[key];
  if (v.is_number_unsigned() && v.get<unsigned>() <= 0xFF) return static_cast<std::uint8_t>(v.get<unsigned>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(s, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == s.size() && value <= 0xFF) return static_cast<std::uint8_t>(value);
  }
  bad(join(path, key), "expected a byte (0-255 or hex string such as \"0x26\")");
}

std::string byte_text(std::uint8_t b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02X", b);
  return buf;
}

SpeedProfile read_profile(const json& j, const std::string& path) {
  try {
    return profile_from_json(j);
  } catch (const ProtocolError& e) {
    bad(path, e.what());
  }
}

}  // namespace

std::string_view to_string(Role role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  return "Unknown";
}

std::optional<Role> parse_role(std::string_view text) {
  for (const auto& [r, name] : kRoleNames) {
    if (name == text) return r;
  }
  return std::nullopt;
}

std::size_t ScenarioConfig::ticks() const {
  if (!(duration > 0.0) || !(tick > 0.0)) return 0;
  return static_cast<std::size_t>(std::llround(duration / tick));
}

const RosterEntry& ScenarioConfig::head() const {
  for (const auto& r : roster) {
    if (r.role == Role::Head) return r;
  }
  throw ConfigError("roster: no Head vehicle");
}

std::vector<LinkSpec> reference_links() {
  struct Row {
    const char* label;
    double mean, std, p99;
  };
  constexpr std::array<Row, 5> rows{{
      {"1/2", 1.33, 0.66, 2.86},
      {"3/4", 0.38, 1.17, 3.09},
      {"5/6", 1.30, 0.57, 2.63},
      {"7/8", 0.36, 2.74, 6.74},
      {"9/10", 4.23, 1.72, 8.23},
  }};
  std::vector<LinkSpec> links;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int dir = 0; dir < 2; ++dir) {
      LinkSpec s;
      s.link_id = static_cast<int>(2 * r + 1 + dir);
      s.row = rows[r].label;
      s.mean = rows[r].mean;
      s.std = rows[r].std;
      s.p99_ref = rows[r].p99;
      links.push_back(s);
    }
  }
  return links;
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.links = reference_links();
  cfg.channels = ChannelMap::default_layout();
  cfg.logic = InteractionLogicTable::defaults();
  using K = EntityKind;
  cfg.roster = {
      {{K::PhysicalVehicle, 1}, Realm::EmulatedPhysical, Role::Head},
      {{K::VirtualVehicle, 2}, Realm::Virtual, Role::HDV},
      {{K::PhysicalVehicle, 3}, Realm::EmulatedPhysical, Role::CACC},
      {{K::PhysicalVehicle, 4}, Realm::EmulatedPhysical, Role::CACC},
      {{K::VirtualVehicle, 5}, Realm::Virtual, Role::HDV},
      {{K::VirtualVehicle, 6}, Realm::Virtual, Role::CACC},
      {{K::VirtualVehicle, 7}, Realm::Virtual, Role::CACC},
      {{K::VirtualVehicle, 8}, Realm::ExternalVirtual, Role::HDV},
  };
  for (double t0 : {30.0, 75.0}) {
    Perturbation p;
    p.profile = sudden_brake_profile(t0);
    cfg.perturbations.push_back(p);
  }
  return cfg;
}

ScenarioConfig all_cacc(ScenarioConfig cfg) {
  for (auto& r : cfg.roster) {
    if (r.role != Role::Head) r.role = Role::CACC;
  }
  cfg.name += "_all_cacc";
  return cfg;
}

ScenarioConfig config_from_json(const json& j) {
  check_object(j, "", {"name", "duration", "tick", "stale_flag_after", "subscriber_capacity", "track", "road",
                       "fusion", "cacc", "hdv", "lateral", "vehicle", "sensor", "links", "link_assignment",
                       "roster", "perturbations", "thresholds", "channel_map", "interaction_logic",
                       "gate_travel_time", "rsu_poll_period", "settle_time"});
  ScenarioConfig cfg;
  cfg.channels = ChannelMap::default_layout();
  cfg.logic = InteractionLogicTable::defaults();
  cfg.links = reference_links();

  read(j, "name", "", cfg.name);
  read(j, "duration", "", cfg.duration);
  read(j, "tick", "", cfg.tick);
  read(j, "stale_flag_after", "", cfg.stale_flag_after);
  read(j, "subscriber_capacity", "", cfg.subscriber_capacity);
  read(j, "gate_travel_time", "", cfg.gate_travel_time);
  read(j, "rsu_poll_period", "", cfg.rsu_poll_period);
  read(j, "settle_time", "", cfg.settle_time);

  if (j.contains("track")) {
    const json& t = j["track"];
    check_object(t, "track", {"center", "straight", "radius"});
    if (t.contains("center")) {
      const json& c = t["center"];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
        bad("track.center", "expected [x, y]");
      }
      cfg.track.center = {c[0].get<double>(), c[1].get<double>()};
    }
    read(t, "straight", "track", cfg.track.straight);
    read(t, "radius", "track", cfg.track.radius);
  }
  if (j.contains("road")) {
    const json& r = j["road"];
    check_object(r, "road", {"x_min", "y_min", "x_max", "y_max"});
    read(r, "x_min", "road", cfg.road.x_min);
    read(r, "y_min", "road", cfg.road.y_min);
    read(r, "x_max", "road", cfg.road.x_max);
    read(r, "y_max", "road", cfg.road.y_max);
  }
  if (j.contains("fusion")) {
    const json& f = j["fusion"];
    check_object(f, "fusion", {"weights", "staleness_limit"});
    read(f, "staleness_limit", "fusion", cfg.fusion.staleness_limit);
    if (f.contains("weights")) {
      const json& w = f["weights"];
      check_object(w, "fusion.weights", {"onboard", "roadside", "native"});
      for (Source s : {Source::Onboard, Source::Roadside, Source::Native}) {
        const std::string key{to_string(s)};
        read(w, key.c_str(), "fusion.weights", cfg.fusion.weights[s]);
      }
    }
  }
  if (j.contains("cacc")) {
    const json& c = j["cacc"];
    check_object(c, "cacc", {"standstill_gap", "time_gap", "gap_gain", "speed_gain", "feedforward_gain",
                             "accel_min", "accel_max", "cruise_speed"});
    read(c, "standstill_gap", "cacc", cfg.cacc.standstill_gap);
    read(c, "time_gap", "cacc", cfg.cacc.time_gap);
    read(c, "gap_gain", "cacc", cfg.cacc.gap_gain);
    read(c, "speed_gain", "cacc", cfg.cacc.speed_gain);
    read(c, "feedforward_gain", "cacc", cfg.cacc.feedforward_gain);
    read(c, "accel_min", "cacc", cfg.cacc.accel_min);
    read(c, "accel_max", "cacc", cfg.cacc.accel_max);
    read(c, "cruise_speed", "cacc", cfg.cacc.cruise_speed);
  }
  if (j.contains("hdv")) {
    const json& h = j["hdv"];
    check_object(h, "hdv", {"reaction_delay", "sensitivity", "relative_speed_gain", "free_speed", "gap_offset",
                            "gap_range", "accel_min", "accel_max"});
    read(h, "reaction_delay", "hdv", cfg.hdv.reaction_delay);
    read(h, "sensitivity", "hdv", cfg.hdv.sensitivity);
    read(h, "relative_speed_gain", "hdv", cfg.hdv.relative_speed_gain);
    read(h, "free_speed", "hdv", cfg.hdv.free_speed);
    read(h, "gap_offset", "hdv", cfg.hdv.gap_offset);
    read(h, "gap_range", "hdv", cfg.hdv.gap_range);
    read(h, "accel_min", "hdv", cfg.hdv.accel_min);
    read(h, "accel_max", "hdv", cfg.hdv.accel_max);
  }
  if (j.contains("lateral")) {
    const json& l = j["lateral"];
    check_object(l, "lateral", {"lookahead", "reference_speed", "lookahead_min", "lookahead_max", "steer_max",
                                "off_path_threshold"});
    read(l, "lookahead", "lateral", cfg.lateral.lookahead);
    read(l, "reference_speed", "lateral", cfg.lateral.reference_speed);
    read(l, "lookahead_min", "lateral", cfg.lateral.lookahead_min);
    read(l, "lookahead_max", "lateral", cfg.lateral.lookahead_max);
    read(l, "steer_max", "lateral", cfg.lateral.steer_max);
    read(l, "off_path_threshold", "lateral", cfg.lateral.off_path_threshold);
  }
  if (j.contains("vehicle")) {
    const json& v = j["vehicle"];
    check_object(v, "vehicle", {"accel_limit", "wheelbase", "speed_max", "steer_max", "steer_rate_max",
                                "fail_safe_after", "brake_on_command_loss"});
    read(v, "accel_limit", "vehicle", cfg.vehicle.accel_limit);
    read(v, "wheelbase", "vehicle", cfg.vehicle.wheelbase);
    read(v, "speed_max", "vehicle", cfg.vehicle.bounds.speed_max);
    read(v, "steer_max", "vehicle", cfg.vehicle.bounds.steer_max);
    read(v, "steer_rate_max", "vehicle", cfg.vehicle.bounds.steer_rate_max);
    read(v, "fail_safe_after", "vehicle", cfg.vehicle.fail_safe_after);
    read(v, "brake_on_command_loss", "vehicle", cfg.vehicle.brake_on_command_loss);
  }
  if (j.contains("sensor")) {
    const json& s = j["sensor"];
    check_object(s, "sensor", {"pos_sigma", "heading_sigma", "speed_quantum", "report_period", "actuation_lag"});
    read(s, "pos_sigma", "sensor", cfg.sensor.pos_sigma);
    read(s, "heading_sigma", "sensor", cfg.sensor.heading_sigma);
    read(s, "speed_quantum", "sensor", cfg.sensor.speed_quantum);
    read(s, "report_period", "sensor", cfg.sensor.report_period);
    read(s, "actuation_lag", "sensor", cfg.sensor.actuation_lag);
  }
  if (j.contains("links")) {
    const json& links = j["links"];
    if (!links.is_array()) bad("links", "expected an array");
    cfg.links.clear();
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string path = "links[" + std::to_string(i) + "]";
      const json& l = links[i];
      check_object(l, path, {"link_id", "row", "mean", "std", "p99", "drop_rate", "fifo"});
      LinkSpec s;
      if (!l.contains("link_id")) bad(join(path, "link_id"), "required");
      read(l, "link_id", path, s.link_id);
      read(l, "row", path, s.row);
      read(l, "mean", path, s.mean);
      read(l, "std", path, s.std);
      read(l, "p99", path, s.p99_ref);
      read(l, "drop_rate", path, s.drop_rate);
      read(l, "fifo", path, s.fifo);
      cfg.links.push_back(s);
    }
  }
  if (j.contains("link_assignment")) {
    const json& a = j["link_assignment"];
    check_object(a, "link_assignment", {"physical_up", "physical_down", "virtual_up", "virtual_down", "hmi_up",
                                        "hmi_down", "external_up", "external_down", "rsu_up", "rsu_down"});
    auto& la = cfg.assignment;
    read(a, "physical_up", "link_assignment", la.physical_up);
    read(a, "physical_down", "link_assignment", la.physical_down);
    read(a, "virtual_up", "link_assignment", la.virtual_up);
    read(a, "virtual_down", "link_assignment", la.virtual_down);
    read(a, "hmi_up", "link_assignment", la.hmi_up);
    read(a, "hmi_down", "link_assignment", la.hmi_down);
    read(a, "external_up", "link_assignment", la.external_up);
    read(a, "external_down", "link_assignment", la.external_down);
    read(a, "rsu_up", "link_assignment", la.rsu_up);
    read(a, "rsu_down", "link_assignment", la.rsu_down);
  }
  if (j.contains("roster")) {
    const json& roster = j["roster"];
    if (!roster.is_array()) bad("roster", "expected an array");
    for (std::size_t i = 0; i < roster.size(); ++i) {
      const std::string path = "roster[" + std::to_string(i) + "]";
      const json& r = roster[i];
      check_object(r, path, {"id", "realm", "role", "join_time", "phase_offset"});
      RosterEntry e;
      e.id = read_id(r, "id", path);
      std::string realm = "Virtual";
      std::string role = "CACC";
      read(r, "realm", path, realm);
      read(r, "role", path, role);
      auto pr = parse_realm(realm);
      if (!pr) bad(join(path, "realm"), "unknown realm '" + realm + "'");
      auto ro = parse_role(role);
      if (!ro) bad(join(path, "role"), "unknown role '" + role + "'");
      e.realm = *pr;
      e.role = *ro;
      read(r, "join_time", path, e.join_time);
      read(r, "phase_offset", path, e.phase_offset);
      cfg.roster.push_back(e);
    }
  }
  if (j.contains("perturbations")) {
    const json& ps = j["perturbations"];
    if (!ps.is_array()) bad("perturbations", "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string path = "perturbations[" + std::to_string(i) + "]";
      const json& p = ps[i];
      check_object(p, path, {"target", "trigger", "profile"});
      Perturbation out;
      if (p.contains("target")) out.target = read_id(p, "target", path);
      std::string trigger = "at_time";
      read(p, "trigger", path, trigger);
      if (trigger == "at_time") {
        out.trigger = Perturbation::Trigger::AtTime;
      } else if (trigger == "operator") {
        out.trigger = Perturbation::Trigger::Operator;
      } else {
        bad(join(path, "trigger"), "expected \"at_time\" or \"operator\"");
      }
      if (!p.contains("profile")) bad(join(path, "profile"), "required");
      out.profile = read_profile(p["profile"], join(path, "profile"));
      cfg.perturbations.push_back(out);
    }
  }
  if (j.contains("thresholds")) {
    const json& t = j["thresholds"];
    check_object(t, "thresholds", {"warn_gap", "collision_gap"});
    read(t, "warn_gap", "thresholds", cfg.thresholds.warn_gap);
    read(t, "collision_gap", "thresholds", cfg.thresholds.collision_gap);
  }
  if (j.contains("channel_map")) {
    const json& cm = j["channel_map"];
    if (!cm.is_array()) bad("channel_map", "expected an array");
    std::map<int, ChannelEntry> entries;
    for (std::size_t i = 0; i < cm.size(); ++i) {
      const std::string path = "channel_map[" + std::to_string(i) + "]";
      const json& c = cm[i];
      check_object(c, path, {"channel", "facility", "on", "off"});
      int channel = -1;
      if (!c.contains("channel")) bad(join(path, "channel"), "required");
      read(c, "channel", path, channel);
      ChannelEntry e{read_id(c, "facility", path), read_byte(c, "on", path), read_byte(c, "off", path)};
      if (!entries.emplace(channel, e).second) bad(join(path, "channel"), "duplicate channel " + std::to_string(channel));
    }
    try {
      cfg.channels = ChannelMap(std::move(entries));
    } catch (const std::invalid_argument& e) {
      bad("channel_map", e.what());
    }
  }
  if (j.contains("interaction_logic")) {
    const json& il = j["interaction_logic"];
    if (!il.is_object()) bad("interaction_logic", "expected an object");
    std::map<std::string, IntentTemplate> entries;
    for (const auto& [action, t] : il.items()) {
      const std::string path = "interaction_logic." + action;
      check_object(t, path, {"mode", "delta", "key"});
      std::string mode;
      read(t, "mode", path, mode);
      auto m = parse_template_mode(mode);
      if (!m) bad(join(path, "mode"), "unknown mode '" + mode + "'");
      IntentTemplate tpl;
      tpl.mode = *m;
      read(t, "delta", path, tpl.delta);
      read(t, "key", path, tpl.key);
      entries[action] = tpl;
    }
    try {
      cfg.logic = InteractionLogicTable(std::move(entries));
    } catch (const std::invalid_argument& e) {
      bad("interaction_logic", e.what());
    }
  }
  return cfg;
}

json config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["duration"] = cfg.duration;
  j["tick"] = cfg.tick;
  j["stale_flag_after"] = cfg.stale_flag_after;
  j["subscriber_capacity"] = cfg.subscriber_capacity;
  j["gate_travel_time"] = cfg.gate_travel_time;
  j["rsu_poll_period"] = cfg.rsu_poll_period;
  j["settle_time"] = cfg.settle_time;
  j["track"] = {{"center", {cfg.track.center.x, cfg.track.center.y}},
                {"straight", cfg.track.straight},
                {"radius", cfg.track.radius}};
  j["road"] = {{"x_min", cfg.road.x_min}, {"y_min", cfg.road.y_min}, {"x_max", cfg.road.x_max}, {"y_max", cfg.road.y_max}};
  json weights;
  for (const auto& [s, w] : cfg.fusion.weights) weights[std::string(to_string(s))] = w;
  j["fusion"] = {{"weights", weights}, {"staleness_limit", cfg.fusion.staleness_limit}};
  const auto& c = cfg.cacc;
  j["cacc"] = {{"standstill_gap", c.standstill_gap}, {"time_gap", c.time_gap},   {"gap_gain", c.gap_gain},
               {"speed_gain", c.speed_gain},         {"feedforward_gain", c.feedforward_gain},
               {"accel_min", c.accel_min},           {"accel_max", c.accel_max}, {"cruise_speed", c.cruise_speed}};
  const auto& h = cfg.hdv;
  j["hdv"] = {{"reaction_delay", h.reaction_delay}, {"sensitivity", h.sensitivity},
              {"relative_speed_gain", h.relative_speed_gain}, {"free_speed", h.free_speed},
              {"gap_offset", h.gap_offset}, {"gap_range", h.gap_range},
              {"accel_min", h.accel_min}, {"accel_max", h.accel_max}};
  const auto& l = cfg.lateral;
  j["lateral"] = {{"lookahead", l.lookahead}, {"reference_speed", l.reference_speed},
                  {"lookahead_min", l.lookahead_min}, {"lookahead_max", l.lookahead_max},
                  {"steer_max", l.steer_max}, {"off_path_threshold", l.off_path_threshold}};
  const auto& v = cfg.vehicle;
  j["vehicle"] = {{"accel_limit", v.accel_limit}, {"wheelbase", v.wheelbase},
                  {"speed_max", v.bounds.speed_max}, {"steer_max", v.bounds.steer_max},
                  {"steer_rate_max", v.bounds.steer_rate_max}, {"fail_safe_after", v.fail_safe_after},
                  {"brake_on_command_loss", v.brake_on_command_loss}};
  const auto& s = cfg.sensor;
  j["sensor"] = {{"pos_sigma", s.pos_sigma}, {"heading_sigma", s.heading_sigma}, {"speed_quantum", s.speed_quantum},
                 {"report_period", s.report_period}, {"actuation_lag", s.actuation_lag}};
  json links = json::array();
  for (const auto& ls : cfg.links) {
    links.push_back({{"link_id", ls.link_id}, {"row", ls.row},         {"mean", ls.mean}, {"std", ls.std},
                     {"p99", ls.p99_ref},     {"drop_rate", ls.drop_rate}, {"fifo", ls.fifo}});
  }
  j["links"] = links;
  const auto& a = cfg.assignment;
  j["link_assignment"] = {{"physical_up", a.physical_up}, {"physical_down", a.physical_down},
                          {"virtual_up", a.virtual_up},   {"virtual_down", a.virtual_down},
                          {"hmi_up", a.hmi_up},           {"hmi_down", a.hmi_down},
                          {"external_up", a.external_up}, {"external_down", a.external_down},
                          {"rsu_up", a.rsu_up},           {"rsu_down", a.rsu_down}};
  json roster = json::array();
  for (const auto& r : cfg.roster) {
    json e{{"id", to_string(r.id)}, {"realm", to_string(r.realm)}, {"role", to_string(r.role)}};
    if (r.join_time != 0.0) e["join_time"] = r.join_time;
    if (r.phase_offset != 0.0) e["phase_offset"] = r.phase_offset;
    roster.push_back(e);
  }
  j["roster"] = roster;
  json perturbations = json::array();
  for (const auto& p : cfg.perturbations) {
    json e{{"trigger", p.trigger == Perturbation::Trigger::AtTime ? "at_time" : "operator"},
           {"profile", profile_to_json(p.profile)}};
    if (p.target) e["target"] = to_string(*p.target);
    perturbations.push_back(e);
  }
  j["perturbations"] = perturbations;
  j["thresholds"] = {{"warn_gap", cfg.thresholds.warn_gap}, {"collision_gap", cfg.thresholds.collision_gap}};
  json channels = json::array();
  for (const auto& [ch, e] : cfg.channels.entries()) {
    channels.push_back({{"channel", ch}, {"facility", to_string(e.facility)}, {"on", byte_text(e.on_byte)},
                        {"off", byte_text(e.off_byte)}});
  }
  j["channel_map"] = channels;
  json logic = json::object();
  for (const auto& [action, tpl] : cfg.logic.entries()) {
    json e{{"mode", to_string(tpl.mode)}};
    if (tpl.delta != 0.0) e["delta"] = tpl.delta;
    if (!tpl.key.empty()) e["key"] = tpl.key;
    logic[action] = e;
  }
  j["interaction_logic"] = logic;
  return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<Diagnostic> validate_config(const ScenarioConfig& cfg) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string path, std::string msg) {
    out.push_back({Diagnostic::Severity::Error, std::move(path), std::move(msg)});
  };
  auto warn = [&](std::string path, std::string msg) {
    out.push_back({Diagnostic::Severity::Warning, std::move(path), std::move(msg)});
  };
  auto check = [&](const std::string& path, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      error(path, e.what());
    }
  };

  if (!(cfg.duration >= 0.0) || !std::isfinite(cfg.duration)) error("duration", "must be finite and >= 0");
  if (!(cfg.tick > 0.0)) {
    error("tick", "must be positive");
  } else if (std::abs(cfg.duration / cfg.tick - std::round(cfg.duration / cfg.tick)) > 1e-6) {
    warn("duration", "not a whole number of ticks; rounded to " + std::to_string(cfg.ticks()) + " ticks");
  }
  if (!(cfg.stale_flag_after > 0.0)) error("stale_flag_after", "must be positive");
  if (cfg.subscriber_capacity == 0) error("subscriber_capacity", "must be positive");
  if (!(cfg.gate_travel_time >= 0.0)) error("gate_travel_time", "must be >= 0");
  if (!(cfg.rsu_poll_period > 0.0)) error("rsu_poll_period", "must be positive");
  if (!(cfg.settle_time >= 0.0)) error("settle_time", "must be >= 0");
  if (!(cfg.track.radius > 0.0 && cfg.track.straight >= 0.0)) error("track", "radius must be > 0 and straight >= 0");
  const double half = cfg.track.straight / 2.0 + cfg.track.radius;
  if (!cfg.road.contains({cfg.track.center.x - half, cfg.track.center.y - cfg.track.radius}) ||
      !cfg.road.contains({cfg.track.center.x + half, cfg.track.center.y + cfg.track.radius})) {
    warn("track", "track leaves the road bounds; obstacle spawns off-road will be rejected");
  }

  check("fusion", [&] { cfg.fusion.validate(); });
  check("cacc", [&] { cfg.cacc.validate(); });
  check("hdv", [&] { cfg.hdv.validate(); });
  check("sensor", [&] { cfg.sensor.validate(); });
  const auto& l = cfg.lateral;
  if (!(l.lookahead > 0.0 && l.reference_speed > 0.0 && l.lookahead_min > 0.0 && l.lookahead_max >= l.lookahead_min &&
        l.steer_max > 0.0 && l.off_path_threshold > 0.0)) {
    error("lateral", "lookahead, bounds, steer_max and off_path_threshold must be positive with min <= max");
  }
  const auto& v = cfg.vehicle;
  if (!(v.accel_limit > 0.0 && v.wheelbase > 0.0)) error("vehicle", "accel_limit and wheelbase must be positive");
  if (!(v.bounds.speed_max > 0.0 && v.bounds.steer_max > 0.0 && v.bounds.steer_rate_max > 0.0)) {
    error("vehicle", "command bounds must be strictly positive");
  }
  if (v.accel_limit < -cfg.cacc.accel_min) {
    warn("vehicle.accel_limit", "below the controller braking bound; commanded decelerations will saturate");
  }
  if (!(v.fail_safe_after > 0.0)) error("vehicle.fail_safe_after", "must be positive");
  if (!(cfg.thresholds.warn_gap > cfg.thresholds.collision_gap && cfg.thresholds.collision_gap > 0.0)) {
    error("thresholds", "need warn_gap > collision_gap > 0");
  }

  std::set<int> link_ids;
  for (std::size_t i = 0; i < cfg.links.size(); ++i) {
    const auto& s = cfg.links[i];
    const std::string path = "links[" + std::to_string(i) + "]";
    check(path, [&] { s.validate(); });
    if (!link_ids.insert(s.link_id).second) error(path + ".link_id", "duplicate link id " + std::to_string(s.link_id));
    if (!p99_consistent(s)) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "p99 %.2f ms differs from mean + 2.326*std = %.4f ms by more than 0.01 ms", s.p99_ref,
                    s.mean + kZ99 * s.std);
      warn(path + ".p99", buf);
    }
  }
  const auto& a = cfg.assignment;
  for (auto [name, id] : std::initializer_list<std::pair<const char*, int>>{
           {"physical_up", a.physical_up}, {"physical_down", a.physical_down}, {"virtual_up", a.virtual_up},
           {"virtual_down", a.virtual_down}, {"hmi_up", a.hmi_up}, {"hmi_down", a.hmi_down},
           {"external_up", a.external_up}, {"external_down", a.external_down}, {"rsu_up", a.rsu_up},
           {"rsu_down", a.rsu_down}}) {
    if (!link_ids.count(id)) error(std::string("link_assignment.") + name, "link " + std::to_string(id) + " not defined");
  }

  if (cfg.roster.empty()) error("roster", "empty");
  std::vector<std::string> heads;
  std::set<EntityId> ids;
  for (std::size_t i = 0; i < cfg.roster.size(); ++i) {
    const auto& r = cfg.roster[i];
    const std::string path = "roster[" + std::to_string(i) + "]";
    if (r.role == Role::Head) heads.push_back(to_string(r.id));
    if (!ids.insert(r.id).second) error(path + ".id", "duplicate id " + to_string(r.id));
    if (r.realm == Realm::EmulatedPhysical && r.id.kind != EntityKind::PhysicalVehicle) {
      error(path, "EmulatedPhysical vehicles must use PhysicalVehicle ids");
    }
    if (r.realm != Realm::EmulatedPhysical && r.id.kind != EntityKind::VirtualVehicle) {
      error(path, std::string(to_string(r.realm)) + " vehicles must use VirtualVehicle ids");
    }
    if (!(r.join_time >= 0.0) || (r.join_time > 0.0 && r.realm != Realm::ExternalVirtual)) {
      error(path + ".join_time", "only ExternalVirtual vehicles may join late; must be >= 0");
    }
    if (!(r.phase_offset >= 0.0 && r.phase_offset < cfg.tick)) error(path + ".phase_offset", "must lie in [0, tick)");
  }
  if (heads.empty() && !cfg.roster.empty()) error("roster", "no Head vehicle");
  if (heads.size() > 1) {
    std::string names;
    for (const auto& h : heads) names += (names.empty() ? "" : ", ") + h;
    error("roster", "more than one Head: " + names);
  }
  if (heads.size() == 1 && cfg.roster.front().role != Role::Head) error("roster[0]", "the Head must lead the roster");

  for (std::size_t i = 0; i < cfg.perturbations.size(); ++i) {
    const auto& p = cfg.perturbations[i];
    const std::string path = "perturbations[" + std::to_string(i) + "]";
    check(path + ".profile", [&] { p.profile.validate(); });
    if (p.target && !ids.count(*p.target)) error(path + ".target", to_string(*p.target) + " not in roster");
    if (p.profile.kind == ProfileKind::Sinusoid && !(p.profile.amplitude < cfg.cacc.cruise_speed)) {
      error(path + ".profile.amplitude", "sinusoid amplitude must stay below the base speed");
    }
  }
  for (const auto& [ch, e] : cfg.channels.entries()) {
    for (std::uint8_t b : {e.on_byte, e.off_byte}) {
      if (b == kStatusHeader) error("channel_map", "channel " + std::to_string(ch) + " uses the status header byte");
    }
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Diagnostic::Severity::Error) return true;
  }
  return false;
}

}  // namespace mixtwin
