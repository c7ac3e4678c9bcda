#include "fedgsca/synthdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedgsca/csv.hpp"
#include "fedgsca/error.hpp"
#include "fedgsca/rng.hpp"

namespace fedgsca {

void validate(const DataSpec& spec) {
  if (spec.num_classes < 2) throw ValidationError("data.num_classes", "must be >= 2");
  if (spec.feature_dim < 1) throw ValidationError("data.feature_dim", "must be >= 1");
  if (spec.samples_per_client.empty()) throw ValidationError("data.samples_per_client", "needs at least one client");
  for (std::size_t k = 0; k < spec.samples_per_client.size(); ++k)
    if (spec.samples_per_client[k] < 1)
      throw ValidationError("data.samples_per_client[" + std::to_string(k) + "]", "must be >= 1");
  if (spec.class_proportions.size() != static_cast<std::size_t>(spec.num_classes))
    throw ValidationError("data.class_proportions", "needs one entry per class");
  double sum = 0.0;
  for (std::size_t c = 0; c < spec.class_proportions.size(); ++c) {
    double p = spec.class_proportions[c];
    if (!std::isfinite(p) || p < 0.0)
      throw ValidationError("data.class_proportions[" + std::to_string(c) + "]", "must be a nonnegative number");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("data.class_proportions", "must sum to 1");
  if (!(spec.cluster_separation > 0.0) || !std::isfinite(spec.cluster_separation))
    throw ValidationError("data.cluster_separation", "must be > 0");
  if (spec.test_samples < 1) throw ValidationError("data.test_samples", "must be >= 1");
}

std::vector<int> apportion(int n, std::span<const double> proportions) {
  const std::size_t C = proportions.size();
  std::vector<int> counts(C, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  remainders.reserve(C);
  int assigned = 0;
  for (std::size_t c = 0; c < C; ++c) {
    double exact = proportions[c] * n;
    // Guard against 0.3 * 100 = 29.999999999999996.
    double fl = std::floor(exact + 1e-9);
    counts[c] = static_cast<int>(fl);
    assigned += counts[c];
    remainders.emplace_back(exact - fl, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[remainders[i % C].second] += 1;
  while (assigned > n) {
    // Only reachable through the epsilon guard; take from the largest class.
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  return counts;
}

std::vector<std::vector<double>> class_means(const DataSpec& spec) {
  const int C = spec.num_classes;
  const int d = spec.feature_dim;
  const double sep = spec.cluster_separation;
  std::vector<std::vector<double>> means(C, std::vector<double>(d, 0.0));
  if (d >= C) {
    // Scaled standard simplex: |e_i - e_j| = sqrt(2).
    for (int c = 0; c < C; ++c) means[c][c] = sep / std::numbers::sqrt2;
  } else if (d >= 2) {
    double radius = sep / (2.0 * std::sin(std::numbers::pi / C));
    for (int c = 0; c < C; ++c) {
      double angle = 2.0 * std::numbers::pi * c / C;
      means[c][0] = radius * std::cos(angle);
      means[c][1] = radius * std::sin(angle);
    }
  } else {
    for (int c = 0; c < C; ++c) means[c][0] = sep * c;
  }
  return means;
}

namespace {

ClientDataset draw_split(int client_id, int n, const DataSpec& spec, const std::vector<std::vector<double>>& means,
                         std::uint64_t stream_seed, std::int64_t& next_id) {
  Rng rng(stream_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto counts = apportion(n, spec.class_proportions);

  std::vector<int> labels;
  labels.reserve(n);
  for (int c = 0; c < spec.num_classes; ++c) labels.insert(labels.end(), counts[c], c);
  std::shuffle(labels.begin(), labels.end(), rng);

  ClientDataset ds;
  ds.client_id = client_id;
  ds.samples.reserve(n);
  for (int label : labels) {
    Sample s;
    s.id = next_id++;
    s.features.resize(spec.feature_dim);
    for (int j = 0; j < spec.feature_dim; ++j) s.features[j] = means[label][j] + noise(rng);
    s.observed_label = label;
    s.true_label = label;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

SyntheticData generate(const DataSpec& spec) {
  validate(spec);
  auto means = class_means(spec);
  SyntheticData out;
  std::int64_t next_id = 0;
  for (int k = 0; k < spec.num_clients(); ++k)
    out.clients.push_back(draw_split(k, spec.samples_per_client[k], spec, means,
                                     derive_seed(spec.seed, {stream::kData, static_cast<std::uint64_t>(k)}), next_id));
  out.test = draw_split(spec.num_clients(), spec.test_samples, spec, means,
                        derive_seed(spec.seed, {stream::kTest}), next_id);
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const ClientDataset> datasets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::size_t d = 0;
  for (const auto& ds : datasets)
    if (!ds.samples.empty()) {
      d = ds.samples.front().features.size();
      break;
    }
  out << "id,client,true_label,observed_label";
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << '\n';
  for (const auto& ds : datasets) {
    for (const auto& s : ds.samples) {
      if (s.features.size() != d) throw ShapeError("write_dataset_csv: inconsistent feature dimension");
      out << s.id << ',' << ds.client_id << ',' << s.true_label << ',' << s.observed_label;
      for (double f : s.features) out << ',' << csv::format_double(f);
      out << '\n';
    }
  }
}

namespace {

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error("malformed " + what + ": '" + text + "'");
  return value;
}

}  // namespace

std::vector<ClientDataset> read_dataset_csv(const std::filesystem::path& path) {
  auto table = csv::read_table(path);
  if (table.header.size() < 4 || table.header[0] != "id" || table.header[1] != "client" ||
      table.header[2] != "true_label" || table.header[3] != "observed_label")
    throw std::runtime_error(path.string() + ": unexpected dataset header");
  const std::size_t d = table.header.size() - 4;
  std::vector<ClientDataset> out;
  for (const auto& row : table.rows) {
    int client = parse_number<int>(row[1], "client");
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& ds) { return ds.client_id == client; });
    if (it == out.end()) {
      out.push_back(ClientDataset{client, {}});
      it = std::prev(out.end());
    }
    Sample s;
    s.id = parse_number<std::int64_t>(row[0], "id");
    s.true_label = parse_number<int>(row[2], "true_label");
    s.observed_label = parse_number<int>(row[3], "observed_label");
    s.features.resize(d);
    for (std::size_t j = 0; j < d; ++j) s.features[j] = parse_number<double>(row[4 + j], "feature");
    it->samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace fedgsca
