#pragma once

#include <span>
#include <vector>

#include "fedgsca/model.hpp"
#include "fedgsca/synthdata.hpp"

namespace fedgsca {

inline constexpr double kPseudoGateDelta = 0.1;

/// Divisor used for the per-class average confidence.
enum class AvgConfDivisor {
  CleanSetSize,  // |D_c| for every class
  PerClassCount  // number of clean samples predicted as c
};

struct ClassThresholds {
  std::vector<double> avg_conf;
  std::vector<double> thresholds;
  double zeta0 = 0.8;
};

struct DatasetSplit {
  std::vector<Sample> clean;
  std::vector<Sample> noisy;
  std::vector<Sample> pseudo;  // subset of `noisy` by id, relabeled
  std::vector<Sample> train;
  double noise_level = 0.0;
};

/// |noisy| / (|clean| + |noisy|).
double noise_level(std::size_t clean_count, std::size_t noisy_count);

/// Argmax with ties resolved toward the smallest index.
std::size_t argmax(std::span<const double> v);

/// Average top-1 confidence per predicted class over the clean samples.
/// Empty input yields all zeros.
std::vector<double> class_confidences(std::span<const Sample> clean, const ModelParams& global, int num_classes,
                                      AvgConfDivisor divisor = AvgConfDivisor::CleanSetSize);

/// zeta0 * avg_c / max(avg). Classes with avg_c == 0 get 0.5 * zeta0; if every
/// avg is zero all thresholds are zeta0.
ClassThresholds adaptive_thresholds(std::span<const double> avg_conf, double zeta0);

/// Every threshold pinned to `value`.
ClassThresholds fixed_thresholds(int num_classes, double value);

/// Noisy samples whose top-1 confidence clears the threshold of their
/// predicted class, relabeled with that class.
std::vector<Sample> generate_pseudo(std::span<const Sample> noisy, const ModelParams& global,
                                    const ClassThresholds& thresholds);

/// clean + pseudo if delta >= 0.1, otherwise the full original dataset.
std::vector<Sample> build_train_set(std::span<const Sample> original, std::span<const Sample> clean,
                                    std::span<const Sample> pseudo, double delta);

}  // namespace fedgsca
