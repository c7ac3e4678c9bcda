#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fedgsca {

struct Sample {
  std::int64_t id = 0;
  std::vector<double> features;
  int observed_label = 0;
  // Never read by training code; evaluation only.
  int true_label = 0;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

struct DataSpec {
  int num_classes = 2;
  int feature_dim = 2;
  std::vector<int> samples_per_client;
  std::vector<double> class_proportions;
  double cluster_separation = 4.0;
  // Size of the held-out test split. Drawn with the same class proportions.
  int test_samples = 1000;
  std::uint64_t seed = 0;

  int num_clients() const noexcept { return static_cast<int>(samples_per_client.size()); }
};

struct SyntheticData {
  std::vector<ClientDataset> clients;
  ClientDataset test;  // client_id == number of clients
};

/// Throws ValidationError naming the offending field.
void validate(const DataSpec& spec);

/// Per-class counts for `n` samples using largest-remainder rounding
/// (ties go to the lower class index).
std::vector<int> apportion(int n, std::span<const double> proportions);

/// Class means. Pairwise distances are at least `cluster_separation`.
std::vector<std::vector<double>> class_means(const DataSpec& spec);

/// Gaussian blobs with unit covariance around `class_means(spec)`.
/// observed_label == true_label for every emitted sample. Pure function of `spec`.
SyntheticData generate(const DataSpec& spec);

/// CSV layout: `id,client,true_label,observed_label,f0..f{d-1}`.
void write_dataset_csv(const std::filesystem::path& path, std::span<const ClientDataset> datasets);

/// Inverse of write_dataset_csv. Clients are returned in order of first
/// appearance.
std::vector<ClientDataset> read_dataset_csv(const std::filesystem::path& path);

}  // namespace fedgsca
