#include "mixtwin/delay_sampling.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace mixtwin {

namespace {

void fill_block(const LinkSpec& spec, std::uint64_t seed, std::size_t block, double* out, std::size_t count) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(spec.link_id), static_cast<std::uint32_t>(block)};
  Rng rng(seq);
  for (std::size_t i = 0; i < count; ++i) out[i] = sample_delay(spec, rng);
}

std::size_t block_count(std::size_t samples) { return (samples + kDelayBlock - 1) / kDelayBlock; }

void check_request(const std::vector<LinkSpec>& links, std::size_t samples) {
  if (samples < 2) throw std::invalid_argument("need at least two delay samples per link");
  for (const auto& spec : links) spec.validate();
}

}  // namespace

std::vector<LinkStats> sample_link_stats_serial(const std::vector<LinkSpec>& links, std::size_t samples,
                                                std::uint64_t seed) {
  check_request(links, samples);
  std::vector<LinkStats> out;
  out.reserve(links.size());
  std::vector<double> buf(samples);
  for (const auto& spec : links) {
    for (std::size_t b = 0; b < block_count(samples); ++b) {
      const std::size_t begin = b * kDelayBlock;
      fill_block(spec, seed, b, buf.data() + begin, std::min(kDelayBlock, samples - begin));
    }
    out.push_back(summarize_delays(buf));
  }
  return out;
}

std::vector<LinkStats> sample_link_stats(const std::vector<LinkSpec>& links, std::size_t samples,
                                         std::uint64_t seed) {
  check_request(links, samples);
  const std::size_t blocks = block_count(samples);
  const auto jobs = static_cast<long>(links.size() * blocks);
  std::vector<std::vector<double>> bufs(links.size(), std::vector<double>(samples));

#pragma omp parallel for schedule(static)
  for (long j = 0; j < jobs; ++j) {
    const auto l = static_cast<std::size_t>(j) / blocks;
    const auto b = static_cast<std::size_t>(j) % blocks;
    const std::size_t begin = b * kDelayBlock;
    fill_block(links[l], seed, b, bufs[l].data() + begin, std::min(kDelayBlock, samples - begin));
  }

  std::vector<LinkStats> out(links.size());
#pragma omp parallel for schedule(static)
  for (long l = 0; l < static_cast<long>(links.size()); ++l) out[l] = summarize_delays(std::move(bufs[l]));
  return out;
}

}  // namespace mixtwin
