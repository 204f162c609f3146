#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "tasu/projector.hpp"
#include "tasu/synthvoice.hpp"

namespace {

using namespace tasu;

FrameDataset frames(std::size_t vocab, std::size_t count) {
  const TokenId blank = static_cast<TokenId>(vocab) - 1;
  FrameDataset data;
  data.dim = vocab;
  const auto text = gen_corpus(count, 4, 12, vocab, blank, 4);
  for (std::size_t i = 0; data.size() < count; ++i) {
    const auto utt = synth_utterance(text[i], SynthConfig{}, vocab, blank, 4, i);
    for (std::size_t t = 0; t < utt.posteriors.num_frames() && data.size() < count; ++t) {
      data.add(utt.posteriors.frame(t), utt.frame_labels[t]);
    }
  }
  return data;
}

// Forward and backward over one minibatch of 64 frames.
void BM_LossAndGrads(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto hidden = static_cast<std::size_t>(state.range(1));
  const auto data = frames(vocab, 64);
  const auto model = ProjectorModel::random(vocab, hidden, 64, 5);
  const auto decoder = FrozenDecoder::from_seed(vocab, 64, 5);
  std::vector<std::size_t> batch(64);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(model, decoder, data, batch));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LossAndGrads)->Args({64, 64})->Args({64, 256})->Args({512, 256});

void BM_Forward(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto data = frames(vocab, 1);
  const auto model = ProjectorModel::random(vocab, 256, 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, data.feature(0)));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(512);

}  // namespace
