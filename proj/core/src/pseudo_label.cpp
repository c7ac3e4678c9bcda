#include "fedgsca/pseudo_label.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace fedgsca {

double noise_level(std::size_t clean_count, std::size_t noisy_count) {
  const std::size_t total = clean_count + noisy_count;
  if (total == 0) throw std::invalid_argument("noise_level: empty dataset");
  return static_cast<double>(noisy_count) / static_cast<double>(total);
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<double> class_confidences(std::span<const Sample> clean, const ModelParams& global, int num_classes,
                                      AvgConfDivisor divisor) {
  std::vector<double> sum(num_classes, 0.0);
  std::vector<std::size_t> count(num_classes, 0);
  for (const auto& s : clean) {
    auto p = predict_proba(global, s.features);
    const std::size_t c = argmax(p);
    sum[c] += p[c];
    ++count[c];
  }
  std::vector<double> avg(num_classes, 0.0);
  if (clean.empty()) return avg;
  for (int c = 0; c < num_classes; ++c) {
    if (divisor == AvgConfDivisor::CleanSetSize)
      avg[c] = sum[c] / static_cast<double>(clean.size());
    else if (count[c] > 0)
      avg[c] = sum[c] / static_cast<double>(count[c]);
  }
  return avg;
}

ClassThresholds adaptive_thresholds(std::span<const double> avg_conf, double zeta0) {
  ClassThresholds t;
  t.zeta0 = zeta0;
  t.avg_conf.assign(avg_conf.begin(), avg_conf.end());
  const double top = avg_conf.empty() ? 0.0 : *std::max_element(avg_conf.begin(), avg_conf.end());
  t.thresholds.assign(avg_conf.size(), zeta0);
  if (!(top > 0.0)) return t;
  for (std::size_t c = 0; c < avg_conf.size(); ++c)
    t.thresholds[c] = avg_conf[c] > 0.0 ? zeta0 * avg_conf[c] / top : 0.5 * zeta0;
  return t;
}

ClassThresholds fixed_thresholds(int num_classes, double value) {
  ClassThresholds t;
  t.zeta0 = value;
  t.avg_conf.assign(num_classes, 0.0);
  t.thresholds.assign(num_classes, value);
  return t;
}

std::vector<Sample> generate_pseudo(std::span<const Sample> noisy, const ModelParams& global,
                                    const ClassThresholds& thresholds) {
  std::vector<Sample> out;
  for (const auto& s : noisy) {
    auto p = predict_proba(global, s.features);
    const std::size_t y = argmax(p);
    if (p[y] >= thresholds.thresholds.at(y)) {
      Sample relabeled = s;
      relabeled.observed_label = static_cast<int>(y);
      out.push_back(std::move(relabeled));
    }
  }
  return out;
}

std::vector<Sample> build_train_set(std::span<const Sample> original, std::span<const Sample> clean,
                                    std::span<const Sample> pseudo, double delta) {
  if (delta < kPseudoGateDelta) return {original.begin(), original.end()};
  std::vector<Sample> out;
  out.reserve(clean.size() + pseudo.size());
  std::unordered_set<std::int64_t> seen;
  for (const auto& s : clean)
    if (seen.insert(s.id).second) out.push_back(s);
  for (const auto& s : pseudo)
    if (seen.insert(s.id).second) out.push_back(s);
  return out;
}

}  // namespace fedgsca
