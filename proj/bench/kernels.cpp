// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "varis/engine.hpp"
#include "varis/exact.hpp"
#include "varis/generator.hpp"
#include "varis/proposal.hpp"
#include "varis/simplify.hpp"

using namespace varis;

namespace {

struct Fixture {
  BayesianNetwork net;
  Evidence ev;
  ProposalDistribution q;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    GeneratorConfig gc;
    gc.nodes = 22;
    gc.det_fraction = 0.5;
    gc.evidence_leaves = 3;
    auto g = generate_random_network(gc, 11);
    Evidence ev = Evidence::resolve(g.network, g.evidence);
    auto s = del_edges(g.network, 2);
    if (!s.deleted_edges.empty()) s = fit_without_evidence(g.network, s, ev);
    auto q = build_proposal(g.network, s, ev);
    return Fixture{std::move(g.network), std::move(ev), std::move(q)};
  }();
  return f;
}

void BM_draw_batch_serial(benchmark::State& state) {
  const auto& f = fixture();
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_batch_serial(f.q, f.net, 4096, 1, ++k));
  state.SetItemsProcessed(state.iterations() * 4096);
}

void BM_draw_batch_parallel(benchmark::State& state) {
  const auto& f = fixture();
  const int workers = static_cast<int>(state.range(0));
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_batch(f.q, f.net, 4096, 1, ++k, workers));
  state.SetItemsProcessed(state.iterations() * 4096);
}

void BM_enumerate_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_likelihood_serial(f.net, f.ev));
}

void BM_enumerate_parallel(benchmark::State& state) {
  const auto& f = fixture();
  ExactLimits limits;
  limits.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_likelihood(f.net, f.ev, limits));
}

}  // namespace

BENCHMARK(BM_draw_batch_serial);
BENCHMARK(BM_draw_batch_parallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(BM_enumerate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_enumerate_parallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
