#include "fedgsca/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace fedgsca {

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truth, int num_classes) {
  if (predictions.size() != truth.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionMatrix m(num_classes, std::vector<long>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes)
      throw std::invalid_argument("confusion_matrix: class index out of range");
    ++m[truth[i]][predictions[i]];
  }
  return m;
}

MetricsRecord macro_metrics(const ConfusionMatrix& confusion) {
  MetricsRecord r;
  r.confusion = confusion;
  const std::size_t C = confusion.size();
  if (C == 0) return r;
  for (std::size_t c = 0; c < C; ++c) {
    const long tp = confusion[c][c];
    long row = 0, col = 0;
    for (std::size_t j = 0; j < C; ++j) {
      row += confusion[c][j];
      col += confusion[j][c];
    }
    const double precision = col > 0 ? static_cast<double>(tp) / col : 0.0;
    const double recall = row > 0 ? static_cast<double>(tp) / row : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.macro_precision += precision;
    r.macro_recall += recall;
    r.macro_f1 += f1;
  }
  r.macro_precision /= static_cast<double>(C);
  r.macro_recall /= static_cast<double>(C);
  r.macro_f1 /= static_cast<double>(C);
  return r;
}

MetricsRecord macro_metrics(std::span<const int> predictions, std::span<const int> truth, int num_classes) {
  return macro_metrics(confusion_matrix(predictions, truth, num_classes));
}

std::optional<double> selection_quality(std::span<const double> posterior_clean, const std::vector<bool>& flipped) {
  if (posterior_clean.size() != flipped.size()) throw std::invalid_argument("selection_quality: length mismatch");
  const std::size_t n = flipped.size();
  const auto n_pos = static_cast<std::size_t>(std::count(flipped.begin(), flipped.end(), true));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  // Score = 1 - posterior; ranking by ascending posterior is ranking by descending score.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return posterior_clean[a] > posterior_clean[b]; });
  if (posterior_clean[order.front()] == posterior_clean[order.back()]) return std::nullopt;

  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && posterior_clean[order[j + 1]] == posterior_clean[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (flipped[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& confusion) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "true\\pred";
  for (std::size_t c = 0; c < confusion.size(); ++c) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < confusion.size(); ++r) {
    out << r;
    for (long v : confusion[r]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace fedgsca
