#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fedgsca {

using ConfusionMatrix = std::vector<std::vector<long>>;  // [true][predicted]

struct MetricsRecord {
  double macro_f1 = 0.0;
  double macro_recall = 0.0;
  double macro_precision = 0.0;
  ConfusionMatrix confusion;
  std::optional<double> selection_auroc;
  std::optional<double> pseudo_accuracy;
};

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truth, int num_classes);

/// Per-class precision/recall/F1 (0 on a zero denominator), unweighted mean.
MetricsRecord macro_metrics(std::span<const int> predictions, std::span<const int> truth, int num_classes);
MetricsRecord macro_metrics(const ConfusionMatrix& confusion);

/// AUROC of (1 - posterior_clean) as a detector of flipped labels, ties by
/// midrank. Absent when the mask holds a single class or all scores tie.
std::optional<double> selection_quality(std::span<const double> posterior_clean, const std::vector<bool>& flipped);

/// CSV with header `true\pred,0,1,...`.
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& confusion);

}  // namespace fedgsca
