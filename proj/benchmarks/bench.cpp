#include <benchmark/benchmark.h>

#include "spxnet/loss.hpp"
#include "spxnet/network.hpp"
#include "spxnet/ops.hpp"
#include "spxnet/rng.hpp"
#include "spxnet/tape.hpp"

using namespace spxnet;

namespace {

Tensor noise(Shape s, Rng& rng) {
  std::vector<float> v(s.numel());
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return Tensor::from(s, std::move(v));
}

void BM_Conv2d(benchmark::State& state) {
  Rng rng(1);
  const int c = static_cast<int>(state.range(0));
  const Tensor x = noise({1, c, 32, 32}, rng);
  ops::ConvParams p;
  p.kernel = noise({c, c, 3, 3}, rng);
  p.pad_h = p.pad_w = 1;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, p));
  state.SetItemsProcessed(state.iterations() * 2LL * c * c * 9 * 32 * 32);
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(64);

void BM_DeskForward(benchmark::State& state, const char* name) {
  Rng rng(2);
  const TopologySpec t = make_topology(name, {1, 8}, 5);
  const NetworkInstance net = build_network(t, 1);
  std::vector<Tensor> views;
  for (int v = 0; v < t.views(); ++v) views.push_back(noise({1, 3, 64, 64}, rng));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(views).full_resolution);
}
BENCHMARK_CAPTURE(BM_DeskForward, dispnet, "dispnet");
BENCHMARK_CAPTURE(BM_DeskForward, despnet, "despnet");
BENCHMARK_CAPTURE(BM_DeskForward, flownet, "flownet");
BENCHMARK_CAPTURE(BM_DeskForward, flospnet, "flospnet");

// Forward, loss and backward on a batch of 8.
void BM_DeskTrainStep(benchmark::State& state) {
  Rng rng(3);
  const TopologySpec t = make_topology("flospnet", {1, 8}, 5);
  const NetworkInstance net = build_network(t, 1);
  const std::vector<Tensor> views{noise({8, 3, 64, 64}, rng), noise({8, 3, 64, 64}, rng)};
  const Tensor gt = noise({8, 2, 64, 64}, rng);
  for (auto _ : state) {
    Tape tape;
    Tape::Scope scope(tape);
    const NetworkOutput out = net.forward(views);
    const Tensor loss = multiscale_epe_loss(out.predictions, gt, default_scale_weights(out.predictions.size()));
    tape.backward(loss);
  }
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
