#pragma once

#include <string>
#include <vector>

namespace mixtwin {

// One auditable occurrence: clamps, drops, stale entities, rejections,
// corner cases, collisions, perturbations.
struct Event {
  double t = 0.0;
  std::string type;
  std::string entity;  // empty when not tied to one entity
  std::string detail;
  double value = 0.0;

  bool operator==(const Event&) const = default;
};

class EventLog {
 public:
  void emit(Event event) { events_.push_back(std::move(event)); }
  void emit(double t, std::string type, std::string entity = {}, std::string detail = {},
            double value = 0.0) {
    events_.push_back({t, std::move(type), std::move(entity), std::move(detail), value});
  }
  const std::vector<Event>& events() const { return events_; }
  std::size_t count(const std::string& type) const {
    std::size_t n = 0;
    for (const auto& e : events_) n += e.type == type ? 1 : 0;
    return n;
  }
  void clear() { events_.clear(); }

 private:
  std::vector<Event> events_;
};

}  // namespace mixtwin
