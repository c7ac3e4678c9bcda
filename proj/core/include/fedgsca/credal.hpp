#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace fedgsca {

enum class BetaSchedule { Cosine, Linear, Constant };

std::string_view to_string(BetaSchedule s);
BetaSchedule parse_beta_schedule(std::string_view text);

struct CredalConfig {
  double alpha = 0.05;
  double beta_start = 0.75;
  double beta_end = 0.55;
  BetaSchedule schedule = BetaSchedule::Cosine;
  int total_rounds = 100;
};

void validate(const CredalConfig& cfg);

/// Plausibility threshold for round `t` in [0, total_rounds].
double beta_at(const CredalConfig& cfg, int t);

/// Per-class possibility values, each exactly `alpha` or exactly 1.
struct PossibilityVector {
  std::vector<double> values;
  double alpha = 0.0;

  bool plausible(std::size_t c) const { return values[c] == 1.0; }
  std::size_t size() const noexcept { return values.size(); }
};

/// 1 for the label and for every class with predicted probability >= beta,
/// alpha elsewhere.
PossibilityVector build_possibility(int label, std::span<const double> probs, double beta, double alpha);

/// Mass on implausible classes. The credal set is {p : implausible_mass(p) <= alpha}.
double implausible_mass(std::span<const double> probs, const PossibilityVector& pi);

bool in_credal_set(std::span<const double> probs, const PossibilityVector& pi);

/// Renormalizes `probs` so plausible classes carry 1 - alpha and
/// implausible ones carry alpha, proportionally within each group.
std::vector<double> project(std::span<const double> probs, const PossibilityVector& pi);

struct CredalLoss {
  double loss = 0.0;
  // Fixed KL target. The logit gradient is probs - target when active and zero
  // otherwise; `active` is false inside the credal set or for ignored samples.
  std::vector<double> target;
  bool active = false;
};

/// Zero inside the credal set, otherwise KL(project(probs) || probs).
CredalLoss rcl_loss(std::span<const double> probs, const PossibilityVector& pi);

/// Uniform credal labeling: ignores the sample when some other class reaches
/// beta, else RCL with only the label plausible.
CredalLoss ucl_loss(std::span<const double> probs, int label, double beta, double alpha);

/// KL(p || q) with 1e-12 floors.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace fedgsca
