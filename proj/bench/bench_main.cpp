#include <benchmark/benchmark.h>

#include "mixtwin/config.hpp"
#include "mixtwin/delay_sampling.hpp"
#include "mixtwin/engine.hpp"
#include "mixtwin/emulation.hpp"

using namespace mixtwin;

static void BM_LinkStatsSerial(benchmark::State& state) {
  const auto links = reference_links();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_link_stats_serial(links, static_cast<std::size_t>(state.range(0)), 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(links.size()));
}
BENCHMARK(BM_LinkStatsSerial)->Arg(10000)->Arg(100000);

static void BM_LinkStatsParallel(benchmark::State& state) {
  const auto links = reference_links();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_link_stats(links, static_cast<std::size_t>(state.range(0)), 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<long>(links.size()));
}
BENCHMARK(BM_LinkStatsParallel)->Arg(10000)->Arg(100000);

static void BM_ScenarioTicks(benchmark::State& state) {
  ScenarioConfig cfg = default_scenario();
  cfg.duration = 10.0;
  for (auto _ : state) {
    Simulation sim(cfg, 7);
    while (!sim.done()) sim.step();
    benchmark::DoNotOptimize(sim.record().rows());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cfg.ticks()));
}
BENCHMARK(BM_ScenarioTicks)->Unit(benchmark::kMillisecond);

static void BM_StatusFrameRoundTrip(benchmark::State& state) {
  Rng rng(7);
  std::bernoulli_distribution coin(0.5);
  ChannelBits bits;
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = coin(rng);
  for (auto _ : state) {
    const StatusFrame f = encode_status_frame(bits);
    benchmark::DoNotOptimize(parse_status_frame(f));
  }
}
BENCHMARK(BM_StatusFrameRoundTrip);

BENCHMARK_MAIN();
