#include "mixtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "mixtwin/errors.hpp"

namespace mixtwin {

using nlohmann::json;

std::vector<double> MetricsRecord::speed_trace(std::size_t vehicle) const {
  std::vector<double> out;
  out.reserve(rows());
  for (const auto& row : speed) out.push_back(row.at(vehicle));
  return out;
}

std::vector<double> MetricsRecord::gap_trace(std::size_t follower) const {
  std::vector<double> out;
  out.reserve(rows());
  for (const auto& row : gap) out.push_back(row.at(follower - 1));
  return out;
}

CornerCaseDetector::CornerCaseDetector(Thresholds thresholds, std::size_t followers)
    : thresholds_(thresholds), below_warn_(followers, 0), below_collision_(followers, 0) {
  if (!(thresholds.warn_gap > thresholds.collision_gap && thresholds.collision_gap > 0.0)) {
    throw std::invalid_argument("corner-case thresholds need warn_gap > collision_gap > 0");
  }
}

std::vector<Event> CornerCaseDetector::observe(double t, std::size_t follower, const EntityId& id, double gap) {
  std::vector<Event> out;
  const bool warn = gap < thresholds_.warn_gap;
  const bool collide = gap < thresholds_.collision_gap;
  char detail[64];
  if (warn && !below_warn_.at(follower)) {
    std::snprintf(detail, sizeof detail, "gap below %.1f m", thresholds_.warn_gap);
    out.push_back({t, "gap_warn", to_string(id), detail, gap});
  }
  if (collide && !below_collision_.at(follower)) {
    std::snprintf(detail, sizeof detail, "gap below %.1f m", thresholds_.collision_gap);
    out.push_back({t, "collision", to_string(id), detail, gap});
  }
  below_warn_[follower] = warn;
  below_collision_[follower] = collide;
  return out;
}

std::vector<Event> detect_corner_cases(const MetricsRecord& r, double warn_gap, double collision_gap) {
  const std::size_t followers = r.roster.empty() ? 0 : r.roster.size() - 1;
  CornerCaseDetector detector({warn_gap, collision_gap}, followers);
  std::vector<Event> out;
  for (std::size_t row = 0; row < r.rows(); ++row) {
    for (std::size_t f = 0; f < followers; ++f) {
      for (auto& e : detector.observe(r.t[row], f, r.roster[f + 1], r.gap[row][f])) out.push_back(std::move(e));
    }
  }
  return out;
}

StabilityReport string_stability_report(const MetricsRecord& r) {
  if (r.perturbation_windows.empty()) throw ReportError("no perturbation window in the record");
  if (r.rows() == 0 || r.roster.size() < 2) throw ReportError("record too short for a stability report");
  StabilityReport report;
  report.window_start = std::numeric_limits<double>::infinity();
  report.window_end = -std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : r.perturbation_windows) {
    report.window_start = std::min(report.window_start, a);
    report.window_end = std::max(report.window_end, b);
  }
  report.window_end = std::min(report.window_end, r.t.back());
  if (!(report.window_start < report.window_end)) throw ReportError("perturbation window lies outside the record");

  const std::size_t n = r.roster.size();
  std::vector<double> lo(n, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
  std::vector<double> min_gap(n, std::numeric_limits<double>::infinity());
  for (std::size_t row = 0; row < r.rows(); ++row) {
    if (r.t[row] < report.window_start - 1e-9 || r.t[row] > report.window_end + 1e-9) continue;
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], r.speed[row][i]);
      hi[i] = std::max(hi[i], r.speed[row][i]);
      if (i > 0) min_gap[i] = std::min(min_gap[i], r.gap[row][i - 1]);
    }
  }
  report.leader_peak_to_peak = hi[0] - lo[0];
  for (std::size_t i = 1; i < n; ++i) {
    FollowerStability f;
    f.id = r.roster[i];
    f.role = r.roles.at(i);
    f.peak_to_peak = hi[i] - lo[i];
    const double pred = hi[i - 1] - lo[i - 1];
    f.ratio = pred > 0.0 ? f.peak_to_peak / pred : (f.peak_to_peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    f.min_gap = min_gap[i];
    f.amplifying = f.role == Role::CACC && f.ratio > 1.0 + kAmplificationTolerance;
    report.followers.push_back(f);
  }
  return report;
}

json stability_to_json(const StabilityReport& s) {
  json followers = json::array();
  for (const auto& f : s.followers) {
    followers.push_back({{"id", to_string(f.id)},
                         {"role", to_string(f.role)},
                         {"peak_to_peak", f.peak_to_peak},
                         {"ratio", f.ratio},
                         {"min_gap", f.min_gap},
                         {"amplifying", f.amplifying}});
  }
  return {{"window_start", s.window_start},
          {"window_end", s.window_end},
          {"leader_peak_to_peak", s.leader_peak_to_peak},
          {"followers", followers}};
}

json event_to_json(const Event& e) {
  return {{"t", e.t}, {"type", e.type}, {"entity", e.entity}, {"detail", e.detail}, {"value", e.value}};
}

void write_timeseries_csv(const MetricsRecord& r, std::ostream& out) {
  const std::size_t n = r.roster.size();
  out << "t";
  for (std::size_t i = 1; i <= n; ++i) out << ",v_" << i;
  for (std::size_t i = 2; i <= n; ++i) out << ",gap_" << i;
  out << '\n';
  char buf[32];
  for (std::size_t row = 0; row < r.rows(); ++row) {
    std::snprintf(buf, sizeof buf, "%.2f", r.t[row]);
    out << buf;
    for (double v : r.speed[row]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out << buf;
    }
    for (double g : r.gap[row]) {
      std::snprintf(buf, sizeof buf, ",%.6f", g);
      out << buf;
    }
    out << '\n';
  }
}

void write_events_jsonl(const std::vector<Event>& events, std::ostream& out) {
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

ExportPaths export_results(const MetricsRecord& r, const json& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ReportError("cannot create " + dir.string() + ": " + ec.message());
  ExportPaths paths{dir / "timeseries.csv", dir / "events.jsonl", dir / "report.json"};
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ReportError("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(paths.timeseries);
    write_timeseries_csv(r, f);
  }
  {
    auto f = open(paths.events);
    write_events_jsonl(r.events, f);
  }
  {
    auto f = open(paths.report);
    f << report.dump(2) << '\n';
  }
  return paths;
}

}  // namespace mixtwin
