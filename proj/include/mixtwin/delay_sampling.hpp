#pragma once

#include <cstdint>
#include <vector>

#include "mixtwin/net.hpp"

namespace mixtwin {

/// Draws `samples` delays per link and summarises each link.
///
/// Samples are generated in fixed-size blocks, each block from its own
/// stream seeded by (seed, link id, block index), so the serial and OpenMP
/// variants produce bit-identical statistics regardless of thread count.
std::vector<LinkStats> sample_link_stats_serial(const std::vector<LinkSpec>& links, std::size_t samples,
                                                std::uint64_t seed);
std::vector<LinkStats> sample_link_stats(const std::vector<LinkSpec>& links, std::size_t samples,
                                         std::uint64_t seed);

inline constexpr std::size_t kDelayBlock = 2048;

}  // namespace mixtwin
