#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixtwin/config.hpp"
#include "mixtwin/net.hpp"

using namespace mixtwin;

namespace {

LinkSpec row(const std::string& label) {
  for (const auto& s : reference_links()) {
    if (s.row == label) return s;
  }
  FAIL("no row " << label);
  return {};
}

std::vector<double> draw(const LinkSpec& spec, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = sample_delay(spec, rng);
  return out;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("RSU row: 10^4 samples average 4.23 +- 3 sigma / sqrt(N)") {
  const auto spec = row("9/10");
  const auto xs = draw(spec, 10000, 1);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= 10000.0;
  CHECK(std::abs(mean - 4.23) <= 3 * 1.72 / 100.0);
}

TEST_CASE("zero std gives the mean exactly") {
  LinkSpec s;
  s.mean = 2.5;
  s.std = 0.0;
  s.p99_ref = 2.5;
  for (double x : draw(s, 100, 9)) CHECK(x == 2.5);
}

TEST_CASE("physical row: empirical p99 of 10^5 samples within 5% of 2.86") {
  const auto spec = row("1/2");
  CHECK(spec.mean + kZ99 * spec.std == doctest::Approx(2.865).epsilon(1e-3));
  auto xs = draw(spec, 100000, 2);
  const auto stats = summarize_delays(xs);
  CHECK(std::abs(stats.p99 - 2.86) <= 0.05 * 2.86);
}

TEST_CASE("delays are never negative") {
  for (double x : draw(row("7/8"), 20000, 3)) CHECK(x >= 0.0);
}

TEST_CASE("censored moments match the analytic values") {
  // Rows whose mean sits within a std of zero lose a visible mass to the clamp.
  for (const auto& label : {"3/4", "7/8"}) {
    const auto spec = row(label);
    const auto stats = summarize_delays(draw(spec, 100000, 4));
    const double m = zero_truncated_mean(spec.mean, spec.std);
    const double sd = zero_truncated_std(spec.mean, spec.std);
    CHECK(stats.mean == doctest::Approx(m).epsilon(0.02));
    CHECK(stats.std == doctest::Approx(sd).epsilon(0.03));
    CHECK(stats.p99 == doctest::Approx(zero_truncated_quantile(spec.mean, spec.std, 0.99)).epsilon(0.03));
  }
  CHECK(zero_truncated_mean(0.38, 1.17) == doctest::Approx(0.681).epsilon(1e-3));
  CHECK(zero_truncated_mean(5.0, 0.0) == 5.0);
  CHECK(zero_truncated_mean(-1.0, 0.0) == 0.0);
}

TEST_CASE("p99 identity holds for four rows and misses on the virtual-vehicle row") {
  for (const auto& label : {"1/2", "5/6", "7/8", "9/10"}) CHECK(p99_consistent(row(label)));
  const auto virt = row("3/4");
  CHECK_FALSE(p99_consistent(virt));
  CHECK(virt.mean + kZ99 * virt.std - virt.p99_ref == doctest::Approx(0.0114).epsilon(0.01));
}

TEST_CASE("scheduler runs events in time order, ties in submission order") {
  Scheduler s;
  std::vector<int> order;
  s.schedule(0.3, [&] { order.push_back(3); });
  s.schedule(0.1, [&] { order.push_back(1); });
  s.schedule(0.1, [&] { order.push_back(2); });
  s.run_until(0.2);
  CHECK(order == std::vector<int>{1, 2});
  CHECK(s.now() == doctest::Approx(0.2));
  s.run_until(1.0);
  CHECK(order == std::vector<int>{1, 2, 3});
  s.schedule(0.5, [&] { order.push_back(4); });  // past: runs at now
  s.run_until(1.0);
  CHECK(order.back() == 4);
}

TEST_CASE("drop rate 1 delivers nothing and logs drops") {
  Scheduler sched;
  EventLog log;
  Network net(sched, 1, &log);
  LinkSpec s{1, "x", 1.0, 0.0, 1.0, 1.0};
  net.add_link(s);
  int delivered = 0;
  for (int i = 0; i < 50; ++i) CHECK_FALSE(net.deliver(1, [&] { ++delivered; }).delivered);
  sched.run_until(10.0);
  CHECK(delivered == 0);
  CHECK(log.count("drop") == 50);
  CHECK_THROWS(net.link_stats(1));
}

TEST_CASE("constant delay preserves spacing") {
  Scheduler sched;
  Network net(sched, 1);
  net.add_link({2, "x", 3.0, 0.0, 3.0});
  std::vector<double> arrivals;
  net.deliver(2, [&] { arrivals.push_back(sched.now()); });
  sched.run_until(0.010);
  net.deliver(2, [&] { arrivals.push_back(sched.now()); });
  sched.run_until(1.0);
  REQUIRE(arrivals.size() == 2);
  CHECK(arrivals[1] - arrivals[0] == doctest::Approx(0.010));
  CHECK(arrivals[0] == doctest::Approx(0.003));
  const auto st = net.link_stats(2);
  CHECK(st.std == 0.0);
  CHECK(st.count == 2);
}

TEST_CASE("independent delays reorder; fifo links do not") {
  auto count_reorders = [](bool fifo) {
    Scheduler sched;
    Network net(sched, 5);
    LinkSpec s{7, "7/8", 0.36, 2.74, 6.74};
    s.fifo = fifo;
    net.add_link(s);
    std::vector<int> got;
    for (int i = 0; i < 200; ++i) {
      net.deliver(7, [&got, i] { got.push_back(i); });
      sched.run_until(sched.now() + 0.001);
    }
    sched.run_until(10.0);
    int inversions = 0;
    for (std::size_t i = 1; i < got.size(); ++i) inversions += got[i] < got[i - 1];
    return inversions;
  };
  CHECK(count_reorders(false) > 0);
  CHECK(count_reorders(true) == 0);
}

TEST_CASE("same seed, same schedule; links draw from separate streams") {
  auto schedule = [](std::uint64_t seed, bool extra_traffic) {
    Scheduler sched;
    Network net(sched, seed);
    for (const auto& s : reference_links()) net.add_link(s);
    std::vector<double> times;
    for (int i = 0; i < 100; ++i) {
      times.push_back(net.deliver(9, [] {}).t_delivery);
      if (extra_traffic) net.deliver(3, [] {});
    }
    return times;
  };
  CHECK(schedule(7, false) == schedule(7, false));
  CHECK(schedule(7, false) == schedule(7, true));
  CHECK(schedule(7, false) != schedule(8, false));
}

TEST_CASE("down links refuse sends") {
  Scheduler sched;
  Network net(sched, 1);
  net.add_link({1, "x", 1.0, 0.0, 1.0});
  net.set_link_up(1, false);
  CHECK_FALSE(net.deliver(1, [] {}).delivered);
  net.set_link_up(1, true);
  CHECK(net.deliver(1, [] {}).delivered);
}

TEST_CASE("link spec domain") {
  CHECK_THROWS(LinkSpec{11, "x", 1.0, 0.1, 1.3}.validate());
  CHECK_THROWS(LinkSpec{1, "x", -1.0, 0.1, 1.3}.validate());
  CHECK_THROWS(LinkSpec{1, "x", 1.0, 0.1, 0.5}.validate());
  CHECK_THROWS(LinkSpec{1, "x", 1.0, 0.1, 1.3, 1.5}.validate());
  Scheduler sched;
  Network net(sched, 1);
  net.add_link({1, "x", 1.0, 0.0, 1.0});
  CHECK_THROWS(net.add_link({1, "x", 1.0, 0.0, 1.0}));
  CHECK_THROWS(net.deliver(4, [] {}));
}

}
