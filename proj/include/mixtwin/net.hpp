#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "mixtwin/emulation.hpp"
#include "mixtwin/events.hpp"

namespace mixtwin {

/// One-way delay model of a communication link, in milliseconds.
struct LinkSpec {
  int link_id = 1;         // 1-10
  std::string row;         // measurement row label, e.g. "1/2"
  double mean = 0.0;       // ms
  double std = 0.0;        // ms
  double p99_ref = 0.0;    // ms, reference 99th percentile
  double drop_rate = 0.0;  // [0,1]
  bool fifo = false;       // never deliver before an earlier message on the same link

  void validate() const;
};

// Standard normal 99th-percentile point used for the consistency check.
inline constexpr double kZ99 = 2.326;

/// |mean + 2.326 std - p99_ref| <= tolerance.
bool p99_consistent(const LinkSpec& spec, double tolerance_ms = 0.01);

/// Normal(mean, std) with negative draws clamped to zero.
double sample_delay(const LinkSpec& spec, Rng& rng);

/// Mean and standard deviation of max(0, X), X ~ Normal(mu, sigma).
double zero_truncated_mean(double mu, double sigma);
double zero_truncated_std(double mu, double sigma);
/// Quantile of max(0, X); equals the normal quantile whenever it is positive.
double zero_truncated_quantile(double mu, double sigma, double p);

/// Virtual-clock event queue. Events at equal times run in submission order.
class Scheduler {
 public:
  double now() const { return now_; }
  void schedule(double t, std::function<void()> action);
  // Runs every event with time <= t, then sets the clock to t.
  void run_until(double t);
  std::size_t pending() const { return queue_.size(); }

 private:
  struct Item {
    double t;
    std::uint64_t seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
};

struct LinkStats {
  double mean = 0.0;
  double std = 0.0;
  double p99 = 0.0;
  std::size_t count = 0;
  std::size_t drops = 0;
};

/// Sample mean, sample std (n - 1), and nearest-rank 99th percentile.
LinkStats summarize_delays(std::vector<double> samples_ms);

struct DeliveryOutcome {
  bool delivered = false;
  double t_delivery = 0.0;  // s
};

/// Simulated links. Each link draws from its own seeded stream so adding
/// traffic on one link never perturbs another link's schedule.
class Network {
 public:
  Network(Scheduler& scheduler, std::uint64_t seed, EventLog* log = nullptr);

  void add_link(const LinkSpec& spec);
  bool has_link(int link_id) const { return links_.count(link_id) != 0; }
  const LinkSpec& spec(int link_id) const;

  // Schedules `on_arrival` at now + sampled delay, or logs a drop.
  DeliveryOutcome deliver(int link_id, std::function<void()> on_arrival,
                          const std::string& what = {});
  // Takes the link down or up; sends on a down link fail immediately.
  void set_link_up(int link_id, bool up);
  bool link_up(int link_id) const;

  LinkStats link_stats(int link_id) const;
  std::vector<int> link_ids() const;

 private:
  struct Link {
    LinkSpec spec;
    Rng rng;
    std::vector<double> samples;  // ms
    std::size_t drops = 0;
    double last_delivery = 0.0;
    bool up = true;
  };

  Link& link(int link_id);
  const Link& link(int link_id) const;

  Scheduler& scheduler_;
  std::uint64_t seed_;
  EventLog* log_;
  std::map<int, Link> links_;
};

}  // namespace mixtwin
