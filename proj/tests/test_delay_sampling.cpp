#include <doctest.h>

#include <cmath>

#include "mixtwin/config.hpp"
#include "mixtwin/delay_sampling.hpp"

using namespace mixtwin;

TEST_SUITE("delay_sampling") {

TEST_CASE("parallel sampling equals the serial reference bit for bit") {
  const auto links = reference_links();
  for (std::size_t n : {std::size_t{2}, kDelayBlock - 1, kDelayBlock, 3 * kDelayBlock + 17, std::size_t{10000}}) {
    const auto a = sample_link_stats_serial(links, n, 7);
    const auto b = sample_link_stats(links, n, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].mean == b[i].mean);
      CHECK(a[i].std == b[i].std);
      CHECK(a[i].p99 == b[i].p99);
      CHECK(a[i].count == n);
    }
  }
}

TEST_CASE("seed changes the draw, statistics stay near the link parameters") {
  const auto links = reference_links();
  const auto a = sample_link_stats(links, 10000, 1);
  const auto b = sample_link_stats(links, 10000, 2);
  CHECK(a[0].mean != b[0].mean);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double m = zero_truncated_mean(links[i].mean, links[i].std);
    CHECK(std::abs(a[i].mean - m) <= 3 * links[i].std / 100.0);
  }
}

TEST_CASE("too few samples is an error") {
  CHECK_THROWS(sample_link_stats(reference_links(), 1, 7));
  CHECK_THROWS(sample_link_stats_serial(reference_links(), 0, 7));
}

}
