#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "fedgsca/synthdata.hpp"

namespace fedgsca {

enum class NoiseKind { Symmetric, Pairflip, CkAsymm };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

struct ClientNoise {
  NoiseKind kind = NoiseKind::Symmetric;
  double rate = 0.0;
};

/// Misdiagnosis candidates S(y) for one source class. `random_choice`
/// means "uniform over every other class" and overrides `classes`.
struct CandidateSet {
  bool random_choice = false;
  std::vector<int> classes;
};

using ConfusionMap = std::map<int, CandidateSet>;

struct NoiseSpec {
  std::vector<ClientNoise> per_client;
  ConfusionMap confusion_map;
  std::uint64_t seed = 0;
};

/// flipped[k][i] is true iff sample i of client k had its label rewritten.
struct FlipMask {
  std::vector<std::vector<bool>> flipped;

  std::size_t count(std::size_t client) const;
};

/// Throws ValidationError for out-of-range rates, invalid class indices,
/// empty candidate sets or candidate sets that contain their source class.
void validate(const NoiseSpec& spec, int num_classes, int num_clients);

/// Rewrites observed labels client by client. Each sample is corrupted
/// independently with probability `rate`. True labels, features and sample
/// counts are left untouched.
std::vector<ClientDataset> corrupt(std::span<const ClientDataset> datasets, const NoiseSpec& spec,
                                   int num_classes, FlipMask* mask = nullptr);

/// CSV layout: `client,id,flipped`.
void write_flip_mask_csv(const std::filesystem::path& path, std::span<const ClientDataset> datasets,
                         const FlipMask& mask);

}  // namespace fedgsca
