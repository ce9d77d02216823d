#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtwin/config.hpp"
#include "mixtwin/events.hpp"

namespace mixtwin {

/// Per-tick ground-truth trace of the platoon in mixed-space units.
struct MetricsRecord {
  std::vector<EntityId> roster;
  std::vector<Role> roles;
  double tick = 0.02;
  double cruise_speed = 2.8;
  std::vector<double> t;
  std::vector<std::vector<double>> speed;  // [row][vehicle]
  std::vector<std::vector<double>> accel;  // [row][vehicle]
  std::vector<std::vector<double>> gap;    // [row][vehicle - 1], vehicles 2..n
  std::vector<Event> events;
  // [start, end] of each perturbation response; end is +inf for periodic ones.
  std::vector<std::pair<double, double>> perturbation_windows;
  bool partial = false;
  std::string partial_reason;

  std::size_t rows() const { return t.size(); }
  std::vector<double> speed_trace(std::size_t vehicle) const;
  std::vector<double> gap_trace(std::size_t follower) const;  // follower >= 1
};

/// Threshold-crossing detector: one warn event per downward crossing of the
/// warn gap and one collision event per crossing of the collision gap.
class CornerCaseDetector {
 public:
  CornerCaseDetector(Thresholds thresholds, std::size_t followers);
  std::vector<Event> observe(double t, std::size_t follower, const EntityId& id, double gap);

 private:
  Thresholds thresholds_;
  std::vector<char> below_warn_;
  std::vector<char> below_collision_;
};

std::vector<Event> detect_corner_cases(const MetricsRecord& record, double warn_gap, double collision_gap);

struct FollowerStability {
  EntityId id;
  Role role = Role::CACC;
  double peak_to_peak = 0.0;  // m/s
  double ratio = 0.0;         // own / predecessor peak-to-peak
  double min_gap = 0.0;       // m
  bool amplifying = false;    // CACC follower with ratio > 1.02
};

struct StabilityReport {
  double window_start = 0.0;
  double window_end = 0.0;
  double leader_peak_to_peak = 0.0;
  std::vector<FollowerStability> followers;
};

inline constexpr double kAmplificationTolerance = 0.02;

/// Peak-to-peak speed excursion of every vehicle inside the union of the
/// perturbation windows, and each follower's ratio to its predecessor.
/// Throws ReportError when the record holds no perturbation window.
StabilityReport string_stability_report(const MetricsRecord& record);

nlohmann::json stability_to_json(const StabilityReport& report);
nlohmann::json event_to_json(const Event& event);

void write_timeseries_csv(const MetricsRecord& record, std::ostream& out);
void write_events_jsonl(const std::vector<Event>& events, std::ostream& out);

struct ExportPaths {
  std::filesystem::path timeseries;
  std::filesystem::path events;
  std::filesystem::path report;
};

/// Writes timeseries.csv, events.jsonl and report.json into `dir`.
/// Throws ReportError when the directory cannot be written.
ExportPaths export_results(const MetricsRecord& record, const nlohmann::json& report,
                           const std::filesystem::path& dir);

}  // namespace mixtwin
