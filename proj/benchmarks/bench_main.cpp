#include <benchmark/benchmark.h>

#include <vector>

#include "sshlab/cnn.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"
#include "sshlab/topology.hpp"

using namespace sshlab;

namespace {

HamiltonianSpec chain(int n, Boundary b, double W) {
  HamiltonianSpec s;
  s.n_cells = n;
  s.v = 0.7;
  s.boundary = b;
  s.disorder_amplitude = W;
  if (W > 0) s.disorder_seed = 1;
  return s;
}

std::vector<Image> random_batch(const Architecture& a, int n) {
  Pcg32 rng(3);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image img(a.in_channels, a.height, a.width);
    for (auto& x : img.data) x = rng.uniform01();
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

static void BM_Diagonalize(benchmark::State& state) {
  const auto h = build_hamiltonian(chain(static_cast<int>(state.range(0)), Boundary::Open, 0.5)).matrix;
  for (auto _ : state) benchmark::DoNotOptimize(diagonalize(h));
}
BENCHMARK(BM_Diagonalize)->Arg(16)->Arg(32)->Arg(64);

static void BM_Winding(benchmark::State& state) {
  const auto spec = chain(static_cast<int>(state.range(0)), Boundary::Periodic, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(winding_number(spec, kDefaultSweepKPoints));
}
BENCHMARK(BM_Winding)->Arg(16)->Arg(32);

static void BM_Forward(benchmark::State& state) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 1);
  const auto batch = random_batch(a, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_sample(m, batch[0]));
}
BENCHMARK(BM_Forward);

static void BM_ForwardBackward(benchmark::State& state) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 1);
  const auto batch = random_batch(a, static_cast<int>(state.range(0)));
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grads(m, batch, labels, 1e-4));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64);

BENCHMARK_MAIN();
