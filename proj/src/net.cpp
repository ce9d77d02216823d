#include "mixtwin/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mixtwin {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void LinkSpec::validate() const {
  if (link_id < 1 || link_id > 10) throw std::invalid_argument("link id outside 1-10");
  if (!(mean >= 0.0 && std >= 0.0)) throw std::invalid_argument("link mean and std must be >= 0");
  if (!(p99_ref >= mean)) throw std::invalid_argument("link p99 reference below its mean");
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw std::invalid_argument("drop rate outside [0,1]");
}

bool p99_consistent(const LinkSpec& spec, double tolerance_ms) {
  return std::abs(spec.mean + kZ99 * spec.std - spec.p99_ref) <= tolerance_ms;
}

double sample_delay(const LinkSpec& spec, Rng& rng) {
  if (spec.std == 0.0) return std::max(0.0, spec.mean);
  std::normal_distribution<double> dist(spec.mean, spec.std);
  return std::max(0.0, dist(rng));
}

double zero_truncated_mean(double mu, double sigma) {
  if (sigma == 0.0) return std::max(0.0, mu);
  const double a = mu / sigma;
  return mu * normal_cdf(a) + sigma * normal_pdf(a);
}

double zero_truncated_std(double mu, double sigma) {
  if (sigma == 0.0) return 0.0;
  const double a = mu / sigma;
  const double second = (mu * mu + sigma * sigma) * normal_cdf(a) + mu * sigma * normal_pdf(a);
  const double m = zero_truncated_mean(mu, sigma);
  return std::sqrt(std::max(0.0, second - m * m));
}

double zero_truncated_quantile(double mu, double sigma, double p) {
  return std::max(0.0, mu + sigma * normal_quantile(p));
}

void Scheduler::schedule(double t, std::function<void()> action) {
  queue_.push({std::max(t, now_), next_seq_++, std::move(action)});
}

void Scheduler::run_until(double t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    Item item = queue_.top();
    queue_.pop();
    now_ = item.t;
    item.action();
  }
  now_ = std::max(now_, t);
}

Network::Network(Scheduler& scheduler, std::uint64_t seed, EventLog* log)
    : scheduler_(scheduler), seed_(seed), log_(log) {}

void Network::add_link(const LinkSpec& spec) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(spec.link_id)};
  Link l{spec, Rng(seq), {}, 0, 0.0, true};
  if (!links_.emplace(spec.link_id, std::move(l)).second) {
    throw std::invalid_argument("duplicate link id " + std::to_string(spec.link_id));
  }
}

Network::Link& Network::link(int link_id) {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw std::out_of_range("unknown link " + std::to_string(link_id));
  return it->second;
}

const Network::Link& Network::link(int link_id) const {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw std::out_of_range("unknown link " + std::to_string(link_id));
  return it->second;
}

const LinkSpec& Network::spec(int link_id) const { return link(link_id).spec; }

void Network::set_link_up(int link_id, bool up) { link(link_id).up = up; }
bool Network::link_up(int link_id) const { return link(link_id).up; }

DeliveryOutcome Network::deliver(int link_id, std::function<void()> on_arrival,
                                 const std::string& what) {
  Link& l = link(link_id);
  const double now = scheduler_.now();
  if (!l.up) return {false, now};
  if (l.spec.drop_rate > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(l.rng) < l.spec.drop_rate) {
      ++l.drops;
      if (log_) log_->emit(now, "drop", {}, "link " + std::to_string(link_id) + " " + what);
      return {false, now};
    }
  }
  const double delay_ms = sample_delay(l.spec, l.rng);
  l.samples.push_back(delay_ms);
  double t = now + delay_ms / 1000.0;
  if (l.spec.fifo) t = std::max(t, l.last_delivery);
  l.last_delivery = std::max(l.last_delivery, t);
  scheduler_.schedule(t, std::move(on_arrival));
  return {true, t};
}

LinkStats summarize_delays(std::vector<double> samples) {
  if (samples.size() < 2) throw std::logic_error("fewer than two delay samples");
  LinkStats s;
  s.count = samples.size();
  const double n = static_cast<double>(s.count);
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / (n - 1.0));
  std::sort(samples.begin(), samples.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * n));
  s.p99 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

LinkStats Network::link_stats(int link_id) const {
  const Link& l = link(link_id);
  if (l.samples.size() < 2) {
    throw std::logic_error("link " + std::to_string(link_id) + " has fewer than two samples");
  }
  LinkStats s = summarize_delays(l.samples);
  s.drops = l.drops;
  return s;
}

std::vector<int> Network::link_ids() const {
  std::vector<int> ids;
  for (const auto& [id, l] : links_) ids.push_back(id);
  return ids;
}

}  // namespace mixtwin
