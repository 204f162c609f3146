#include <benchmark/benchmark.h>

#include "tasu/cps.hpp"
#include "tasu/synthvoice.hpp"

namespace {

using namespace tasu;

void BM_Cps(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto length = static_cast<std::size_t>(state.range(1));
  CpsConfig cfg;
  cfg.blank_id = static_cast<TokenId>(vocab) - 1;
  const auto text = gen_corpus(1, length, length, vocab, cfg.blank_id, 2);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(cps_simulate(text[0], cfg, vocab, 2, i++));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(length));
}
BENCHMARK(BM_Cps)->Args({64, 32})->Args({64, 256})->Args({5000, 64});

void BM_SynthVoice(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const TokenId blank = static_cast<TokenId>(vocab) - 1;
  const auto text = gen_corpus(1, 32, 32, vocab, blank, 3);
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_posteriors(text[0], SynthConfig{}, vocab, blank, 3, i++));
  }
}
BENCHMARK(BM_SynthVoice)->Arg(64)->Arg(1024);

}  // namespace
