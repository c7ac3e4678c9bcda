#pragma once

#include <vector>

#include "fedgsca/noisegen.hpp"
#include "fedgsca/orchestrator.hpp"
#include "fedgsca/synthdata.hpp"

namespace fedgsca::testing {

struct Fixture {
  std::vector<ClientDataset> clients;
  ClientDataset test;
  FlipMask mask;
};

inline Fixture make_fixture(const DataSpec& data, std::vector<ClientNoise> noise, std::uint64_t noise_seed) {
  auto gen = generate(data);
  Fixture f;
  NoiseSpec spec{std::move(noise), {}, noise_seed};
  f.clients = corrupt(gen.clients, spec, data.num_classes, &f.mask);
  f.test = std::move(gen.test);
  return f;
}

inline std::vector<ClientNoise> symmetric(std::vector<double> rates) {
  std::vector<ClientNoise> out;
  for (double r : rates) out.push_back({NoiseKind::Symmetric, r});
  return out;
}

inline FedConfig small_config(int K, int C, int T, Method method) {
  FedConfig cfg;
  cfg.num_clients = K;
  cfg.num_classes = C;
  cfg.rounds = T;
  cfg.method = method;
  cfg.credal.total_rounds = T;
  cfg.train.local_epochs = 2;
  cfg.train.batch_size = 16;
  cfg.train.base_learning_rate = 0.1;
  cfg.train.seed = 5;
  return cfg;
}

}  // namespace fedgsca::testing
