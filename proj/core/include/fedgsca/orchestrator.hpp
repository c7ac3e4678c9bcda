#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedgsca/credal.hpp"
#include "fedgsca/metrics.hpp"
#include "fedgsca/model.hpp"
#include "fedgsca/pseudo_label.hpp"
#include "fedgsca/selector.hpp"
#include "fedgsca/synthdata.hpp"

namespace fedgsca {

enum class Method {
  FedGSCA,
  FedAvgBaseline,
  NoGSS,           // client-local CSS only; no RCL, fixed threshold
  NoRCL,           // cross-entropy on the selected/pseudo-labeled set
  FixedThreshold,  // NoRCL plus every class threshold pinned
  UCL              // FedGSCA with the uniform credal labeling loss
};

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

/// Which pieces of the protocol a method turns on.
struct MethodTraits {
  bool select_samples = true;
  bool aggregate_selectors = true;
  bool adaptive_threshold = true;
  LossKind loss = LossKind::RCL;
};

MethodTraits traits_of(Method m);

enum class AggregationWeights { OriginalSize, TrainSetSize };

struct FedConfig {
  int num_clients = 1;
  int num_classes = 2;
  int rounds = 1;
  TrainConfig train;
  CredalConfig credal;
  double zeta0 = 0.8;
  double fixed_threshold = 0.7;
  Method method = Method::FedGSCA;
  EmOptions em;
  AggregationWeights weights = AggregationWeights::OriginalSize;
  AvgConfDivisor avg_divisor = AvgConfDivisor::CleanSetSize;
  bool parallel_clients = false;
};

void validate(const FedConfig& cfg);

/// Selector broadcast to (or kept by) a client. Empty before the first fit.
struct SelectorState {
  std::optional<SelectorParams> params;
  bool degenerate = false;
};

struct ClientRoundRecord {
  int client = 0;
  double tau = 0.0;
  double delta = 0.0;
  std::size_t n_clean = 0;
  std::size_t n_noisy = 0;
  std::size_t n_pseudo = 0;
  std::size_t n_pseudo_correct = 0;
  std::size_t n_train = 0;
  bool selected = false;       // a clean/noisy split was computed this round
  bool pseudo_branch = false;  // delta >= 0.1
  bool degenerate_fit = false;
  bool has_selector = false;   // `uploaded` is meaningful
  SelectorParams uploaded;     // CSS sent to the server
  std::vector<double> posteriors;
  std::vector<bool> flipped;
};

struct LocalUpdateResult {
  ModelParams params;
  SelectorState selector;
  ClientRoundRecord record;
};

/// One client's round: losses under the broadcast model, tau, split, delta,
/// optional pseudo-labeling, E local epochs, then an EM refit of the CSS
/// warm-started from `selector`. Round 0 (or a missing selector) trains
/// cross-entropy on the raw data and only fits the CSS.
LocalUpdateResult local_update(int round, const ClientDataset& data, const ModelParams& global,
                               const SelectorState& selector, const FedConfig& cfg);

/// (1/K) * sum_k ||local_k - global||^2.
double stability_metric(std::span<const ModelParams> locals, const ModelParams& global);

struct RoundLog {
  int round = 0;
  Method method = Method::FedGSCA;
  double macro_f1 = 0.0;
  double macro_recall = 0.0;
  double macro_precision = 0.0;
  double stability = 0.0;
  std::optional<double> mean_delta;
  std::optional<double> mean_tau;
  std::optional<double> selection_auroc;
  std::optional<double> pseudo_acc;
  double learning_rate = 0.0;
  double beta = 0.0;
  std::vector<ClientRoundRecord> clients;
};

struct RunResult {
  std::vector<RoundLog> rounds;
  ModelParams global;
  SelectorState selector;
  MetricsRecord final_metrics;
};

using RoundCallback = std::function<void(const RoundLog&)>;

/// Full protocol over cfg.rounds rounds. Deterministic in (cfg, datasets)
/// regardless of cfg.parallel_clients. `on_round` sees every log as soon as
/// the round's aggregation finishes.
RunResult run(const FedConfig& cfg, std::span<const ClientDataset> clients, const ClientDataset& test,
              const RoundCallback& on_round = {});

/// Test-set metrics of a model.
MetricsRecord evaluate(const ModelParams& params, const ClientDataset& test, int num_classes);

inline constexpr std::string_view kRoundsCsvHeader =
    "round,method,macro_f1,macro_recall,macro_precision,stability,mean_delta,mean_tau,selection_auroc,pseudo_acc";

std::string format_round_row(const RoundLog& log);
void write_rounds_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds);

/// Per-client detail: delta, subset sizes, pseudo-label accuracy and the six
/// selector numbers uploaded each round.
void write_clients_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds);

}  // namespace fedgsca
