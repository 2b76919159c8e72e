#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "modechain/config.hpp"
#include "modechain/decode.hpp"
#include "modechain/dists.hpp"
#include "modechain/lstm.hpp"
#include "modechain/modes.hpp"
#include "modechain/rng.hpp"
#include "modechain/seqspace.hpp"
#include "modechain/train.hpp"

using namespace modechain;

namespace {

const SpaceSpec& desk_space() {
  static const SpaceSpec s = profile_config("default").space;
  return s;
}

LogProbTable random_table(std::uint64_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) total += v = -std::log(1.0 - rng.uniform());
  LogProbTable t;
  t.values.resize(n);
  t.normalized = true;
  for (std::uint64_t i = 0; i < n; ++i) t.values[i] = std::log(w[i] / total);
  return t;
}

void BM_ModelTable(benchmark::State& state) {
  const auto hs = static_cast<std::uint32_t>(state.range(0));
  const LstmParams p = init_params(LstmDims{desk_space().vocab.size, hs, hs}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(model_table(p, desk_space()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(space_size(desk_space())));
}
BENCHMARK(BM_ModelTable)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LossAndGrads(benchmark::State& state) {
  const auto hs = static_cast<std::uint32_t>(state.range(0));
  const LstmParams p = init_params(LstmDims{desk_space().vocab.size, hs, hs}, 2);
  Rng rng(3);
  std::vector<SequenceId> ids(static_cast<std::size_t>(state.range(1)));
  for (auto& id : ids) id = rng.below(space_size(desk_space()));
  const Batch batch = make_batch(desk_space(), ids);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(p, batch, desk_space().vocab.eos_id));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_LossAndGrads)->Args({32, 64})->Args({64, 64})->Unit(benchmark::kMicrosecond);

void BM_ModeSet(benchmark::State& state) {
  const LogProbTable t = random_table(space_size(desk_space()), 4);
  for (auto _ : state) benchmark::DoNotOptimize(mode_set(t, static_cast<std::uint64_t>(state.range(0))));
}
BENCHMARK(BM_ModeSet)->Arg(1)->Arg(20)->Arg(1000);

void BM_RecoveryCost(benchmark::State& state) {
  const std::uint64_t n = space_size(desk_space());
  const ModeSet m = mode_set(random_table(n, 5), static_cast<std::uint64_t>(state.range(0)));
  const LogProbTable q = random_table(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(recovery_cost(m, q));
}
BENCHMARK(BM_RecoveryCost)->Arg(20)->Arg(1000);

void BM_BeamSearch(benchmark::State& state) {
  const LstmParams p = init_params(LstmDims{desk_space().vocab.size, 64, 64}, 7);
  const DecodeConfig cfg{DecodeKind::beam, static_cast<std::uint64_t>(state.range(0)), 0, 0};
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(p, desk_space(), cfg));
}
BENCHMARK(BM_BeamSearch)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
