// Serial reference against the OpenMP replicate runner on the two hot loops:
// field sampling and crossing levels. Arg = thread count (0 = serial).

#include <benchmark/benchmark.h>

#include "gfperc/lattice.hpp"
#include "gfperc/montecarlo.hpp"
#include "gfperc/percolation.hpp"
#include "gfperc/sampler.hpp"

using namespace gfperc;

namespace {

struct Setup {
  RegionGraph graph = crossing_region(0.5, 8.0, 2.0);
  ConvolutionSampler sampler{build_lattice_sqrt_kernel(Kernel::bargmann_fock(), 0.5), graph};
};

const Setup& setup() {
  static const Setup s;
  return s;
}

template <class Body>
void run(benchmark::State& state, Body body) {
  const Setup& s = setup();
  const auto threads = static_cast<int>(state.range(0));
  const std::uint64_t n = 256;
  auto make = [&] { return std::pair{s.sampler.make_workspace(), std::vector<double>(s.graph.size())}; };
  if (threads > 0) set_thread_count(threads);
  for (auto _ : state) {
    if (threads == 0) {
      benchmark::DoNotOptimize(run_replicates_serial(n, make, body));
    } else {
      benchmark::DoNotOptimize(run_replicates(n, make, body));
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
  state.counters["sites"] = static_cast<double>(s.graph.size());
}

void BM_Sample(benchmark::State& state) {
  run(state, [](auto& ws, std::uint64_t r) {
    setup().sampler.sample_into(1, r, ws.first, ws.second);
    return ws.second[0];
  });
}

void BM_CrossingLevel(benchmark::State& state) {
  run(state, [](auto& ws, std::uint64_t r) {
    const Setup& s = setup();
    s.sampler.sample_into(1, r, ws.first, ws.second);
    return black_crossing_level(s.graph, ws.second, s.graph.box(), Direction::left_right);
  });
}

}  // namespace

BENCHMARK(BM_Sample)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CrossingLevel)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
