#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "fedgsca/rng.hpp"
#include "fedgsca/synthdata.hpp"

namespace fedgsca {

struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden;  // empty: softmax-linear
  int num_classes = 0;

  bool operator==(const Architecture&) const = default;

  /// Total number of scalar parameters.
  std::size_t parameter_count() const;
};

/// Weights of a softmax-linear classifier or a tanh MLP, stored flat.
/// Layer l occupies W_l (out x in, row-major) followed by b_l (out).
/// Models with the same architecture form a vector space, which is all
/// FedAvg and the stability metric need.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(Architecture arch);
  ModelParams(Architecture arch, std::vector<double> values);

  const Architecture& architecture() const noexcept { return arch_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  int num_layers() const noexcept { return static_cast<int>(arch_.hidden.size()) + 1; }
  int layer_in(int layer) const;
  int layer_out(int layer) const;
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;

  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;

 private:
  Architecture arch_;
  std::vector<double> values_;
};

/// Zero weights for the linear model; small Gaussian weights for hidden
/// layers (an all-zero MLP would never break symmetry).
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> logits(const ModelParams& params, std::span<const double> features);
std::vector<double> predict_proba(const ModelParams& params, std::span<const double> features);

/// -ln max(p(y_i | x_i), 1e-12) for every sample, using observed labels.
std::vector<double> per_sample_ce_loss(const ModelParams& params, std::span<const Sample> samples);

enum class LossKind { CE, RCL, UCL };

std::string_view to_string(LossKind kind);

/// Hyperparameters the credal losses read for the current round.
struct LossContext {
  double alpha = 0.05;
  double beta = 0.75;
};

struct SampleLoss {
  double loss = 0.0;
  std::vector<double> dlogits;  // d loss / d logits
};

/// Loss of one prediction and its gradient w.r.t. the logits. Credal targets
/// are rebuilt from `probs` and then held fixed.
SampleLoss sample_loss(std::span<const double> probs, int label, LossKind kind, const LossContext& ctx);

struct BatchGradient {
  double mean_loss = 0.0;
  std::vector<double> grad;  // same layout as ModelParams::values()
};

/// Analytic gradient of the mean batch loss (no weight decay).
/// Throws TrainingError naming the sample id if anything is non-finite.
BatchGradient batch_gradient(const ModelParams& params, std::span<const Sample> batch, LossKind kind,
                             const LossContext& ctx);

/// params - lr * (grad + weight_decay * params).
ModelParams sgd_step(const ModelParams& params, std::span<const Sample> batch, LossKind kind,
                     const LossContext& ctx, double lr, double weight_decay);

struct TrainConfig {
  int local_epochs = 5;
  int batch_size = 128;
  double base_learning_rate = 1e-2;
  std::vector<double> lr_drop_points{0.7, 0.9};
  double lr_drop_factor = 0.1;
  double weight_decay = 1e-6;
  std::vector<int> hidden;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// Learning rate used in round t of T: the base rate times drop_factor for
/// every drop point p with t >= ceil(p * T).
double learning_rate_at(const TrainConfig& cfg, int round, int total_rounds);

/// Runs `epochs` passes of minibatch SGD over `data`, reshuffling with `rng`
/// before every epoch.
ModelParams train_epochs(ModelParams params, std::span<const Sample> data, int epochs, int batch_size,
                         double lr, double weight_decay, LossKind kind, const LossContext& ctx, Rng& rng);

struct WeightedModel {
  const ModelParams* params = nullptr;
  double weight = 0.0;
};

/// Weighted elementwise mean with weights normalized to sum 1.
ModelParams fedavg_combine(std::span<const WeightedModel> models);

/// Squared Euclidean distance over all parameters.
double squared_distance(const ModelParams& a, const ModelParams& b);

/// Binary dump: magic, architecture header, then little-endian doubles.
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace fedgsca
