#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fedgsca/model.hpp"
#include "fedgsca/noisegen.hpp"
#include "fedgsca/orchestrator.hpp"
#include "fedgsca/rng.hpp"
#include "fedgsca/selector.hpp"
#include "fedgsca/synthdata.hpp"

namespace {

using namespace fedgsca;

std::vector<double> mixture_losses(int n) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> clean(0.2, 0.05), noisy(2.0, 0.3);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = i % 3 == 0 ? noisy(rng) : clean(rng);
  return out;
}

DataSpec blobs(int per_client, int clients, int dim) {
  DataSpec spec;
  spec.num_classes = 4;
  spec.feature_dim = dim;
  spec.samples_per_client.assign(clients, per_client);
  spec.class_proportions = {0.4, 0.3, 0.2, 0.1};
  spec.cluster_separation = 7.0;
  spec.test_samples = 200;
  spec.seed = 3;
  return spec;
}

void BM_FitEm(benchmark::State& state) {
  const auto losses = mixture_losses(static_cast<int>(state.range(0)));
  const auto init = median_split_init(losses);
  for (auto _ : state) benchmark::DoNotOptimize(fit_em(losses, init));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitEm)->Arg(500)->Arg(2000)->Arg(10000);

void BM_SgdEpoch(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  auto data = generate(blobs(2000, 1, dim));
  const ModelParams start = init_params(Architecture{dim, {}, 4}, 1);
  Rng rng(7);
  for (auto _ : state) {
    auto out = train_epochs(start, data.clients[0].samples, 1, 32, 0.1, 1e-6, LossKind::CE, {}, rng);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_SgdEpoch)->Arg(8)->Arg(128);

void BM_FederatedRound(benchmark::State& state) {
  const auto method = static_cast<Method>(state.range(0));
  auto data = generate(blobs(500, 4, 128));
  NoiseSpec noise;
  noise.per_client = {{NoiseKind::Symmetric, 0.0}, {NoiseKind::Symmetric, 0.2},
                      {NoiseKind::Symmetric, 0.2}, {NoiseKind::Symmetric, 0.4}};
  noise.seed = 4;
  auto clients = corrupt(data.clients, noise, 4);
  FedConfig cfg;
  cfg.num_clients = 4;
  cfg.num_classes = 4;
  cfg.rounds = 2;  // bootstrap round plus one full round
  cfg.method = method;
  cfg.train.local_epochs = 5;
  cfg.train.batch_size = 32;
  cfg.train.base_learning_rate = 0.1;
  cfg.credal.total_rounds = 2;
  for (auto _ : state) benchmark::DoNotOptimize(run(cfg, clients, data.test));
  state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_FederatedRound)
    ->Arg(static_cast<int>(Method::FedGSCA))
    ->Arg(static_cast<int>(Method::FedAvgBaseline))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
