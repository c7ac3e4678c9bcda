#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedgsca/noisegen.hpp"
#include "fedgsca/orchestrator.hpp"
#include "fedgsca/synthdata.hpp"

namespace fedgsca {

inline constexpr std::string_view kManifestSchema = "fedgsca.manifest/1";

/// One experiment: data, noise and protocol settings plus trial count.
/// Trial i uses seed + i, from which the data, noise and training seeds are
/// derived independently, so methods sharing `seed` see identical noisy data.
struct RunManifest {
  std::string label;
  DataSpec data;
  NoiseSpec noise;
  FedConfig fed;
  std::filesystem::path output_dir;
  int trials = 1;
  std::uint64_t seed = 0;
};

/// Parses and validates. Throws ValidationError with a dotted field path.
RunManifest parse_manifest(std::string_view json_text);
RunManifest load_manifest(const std::filesystem::path& path);

/// Checks every cross-field invariant (client counts, class indices...).
void validate(const RunManifest& manifest);

struct TrialSeeds {
  std::uint64_t data = 0;
  std::uint64_t noise = 0;
  std::uint64_t train = 0;
};

TrialSeeds trial_seeds(std::uint64_t seed, int trial);

/// Paths (dotted) whose values differ between the data/noise/seed/trials
/// sections of two manifests. Empty means the fixtures are shared.
std::vector<std::string> fixture_differences(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace fedgsca
