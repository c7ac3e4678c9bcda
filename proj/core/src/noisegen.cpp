#include "fedgsca/noisegen.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "fedgsca/error.hpp"
#include "fedgsca/rng.hpp"

namespace fedgsca {

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Symmetric: return "symmetric";
    case NoiseKind::Pairflip: return "pairflip";
    case NoiseKind::CkAsymm: return "ck_asymm";
  }
  return "?";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "symmetric") return NoiseKind::Symmetric;
  if (text == "pairflip") return NoiseKind::Pairflip;
  if (text == "ck_asymm" || text == "ckasymm") return NoiseKind::CkAsymm;
  throw std::invalid_argument("unknown noise kind '" + std::string(text) + "'");
}

std::size_t FlipMask::count(std::size_t client) const {
  return static_cast<std::size_t>(std::count(flipped.at(client).begin(), flipped.at(client).end(), true));
}

void validate(const NoiseSpec& spec, int num_classes, int num_clients) {
  if (static_cast<int>(spec.per_client.size()) != num_clients)
    throw ValidationError("noise.per_client", "needs one entry per client (" + std::to_string(num_clients) + ")");
  bool any_ck = false;
  for (std::size_t k = 0; k < spec.per_client.size(); ++k) {
    double r = spec.per_client[k].rate;
    if (!(r >= 0.0 && r <= 1.0))
      throw ValidationError("noise.per_client[" + std::to_string(k) + "].rate", "must lie in [0, 1]");
    any_ck = any_ck || spec.per_client[k].kind == NoiseKind::CkAsymm;
  }
  for (const auto& [source, cands] : spec.confusion_map) {
    const std::string field = "noise.confusion_map." + std::to_string(source);
    if (source < 0 || source >= num_classes) throw ValidationError(field, "source class out of range");
    if (cands.random_choice) continue;
    if (cands.classes.empty()) throw ValidationError(field, "empty candidate set");
    for (int c : cands.classes) {
      if (c < 0 || c >= num_classes) throw ValidationError(field, "candidate class out of range");
      if (c == source) throw ValidationError(field, "candidate set contains its source class");
    }
  }
  if (any_ck) {
    for (int c = 0; c < num_classes; ++c)
      if (!spec.confusion_map.contains(c))
        throw ValidationError("noise.confusion_map." + std::to_string(c), "empty candidate set");
  }
}

namespace {

int uniform_other(int label, int num_classes, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, num_classes - 2);
  int c = pick(rng);
  return c >= label ? c + 1 : c;
}

}  // namespace

std::vector<ClientDataset> corrupt(std::span<const ClientDataset> datasets, const NoiseSpec& spec, int num_classes,
                                   FlipMask* mask) {
  validate(spec, num_classes, static_cast<int>(datasets.size()));
  std::vector<ClientDataset> out(datasets.begin(), datasets.end());
  if (mask) mask->flipped.assign(out.size(), {});
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& cfg = spec.per_client[k];
    Rng rng(derive_seed(spec.seed, {stream::kNoise, static_cast<std::uint64_t>(k)}));
    std::bernoulli_distribution flip(cfg.rate);
    std::vector<bool> flipped(out[k].samples.size(), false);
    for (std::size_t i = 0; i < out[k].samples.size(); ++i) {
      auto& s = out[k].samples[i];
      s.observed_label = s.true_label;
      if (!flip(rng)) continue;
      switch (cfg.kind) {
        case NoiseKind::Symmetric:
          s.observed_label = uniform_other(s.true_label, num_classes, rng);
          break;
        case NoiseKind::Pairflip:
          s.observed_label = (s.true_label + 1) % num_classes;
          break;
        case NoiseKind::CkAsymm: {
          const auto& cands = spec.confusion_map.at(s.true_label);
          if (cands.random_choice) {
            s.observed_label = uniform_other(s.true_label, num_classes, rng);
          } else {
            std::uniform_int_distribution<std::size_t> pick(0, cands.classes.size() - 1);
            s.observed_label = cands.classes[pick(rng)];
          }
          break;
        }
      }
      flipped[i] = s.observed_label != s.true_label;
    }
    if (mask) mask->flipped[k] = std::move(flipped);
  }
  return out;
}

void write_flip_mask_csv(const std::filesystem::path& path, std::span<const ClientDataset> datasets,
                         const FlipMask& mask) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "client,id,flipped\n";
  for (std::size_t k = 0; k < datasets.size(); ++k)
    for (std::size_t i = 0; i < datasets[k].samples.size(); ++i)
      out << datasets[k].client_id << ',' << datasets[k].samples[i].id << ',' << (mask.flipped.at(k).at(i) ? 1 : 0)
          << '\n';
}

}  // namespace fedgsca
