#pragma once

#include <array>
#include <span>
#include <vector>

#include "fedgsca/synthdata.hpp"

namespace fedgsca {

inline constexpr double kVarianceFloor = 1e-8;
inline constexpr double kTauCap = 0.8;
inline constexpr double kTauEpsilon = 1e-6;

/// Two-component Gaussian mixture over per-sample losses.
/// Component 0 is "clean" (smaller mean), component 1 is "noisy".
struct SelectorParams {
  std::array<double, 2> mu{0.0, 1.0};
  std::array<double, 2> sigma2{1.0, 1.0};
  std::array<double, 2> pi{0.5, 0.5};

  bool operator==(const SelectorParams&) const = default;
};

/// Throws ValidationError when priors do not sum to 1, a variance is below
/// the floor, or the components are out of order.
void validate(const SelectorParams& sel);

/// Swaps components if needed so that mu[0] <= mu[1].
SelectorParams ordered(SelectorParams sel);

struct ClientLossStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

ClientLossStats loss_stats(std::span<const double> losses);

double gaussian_pdf(double x, double mu, double sigma2);

/// Posterior of the clean component. If both weighted densities underflow,
/// returns 1 when x is nearer mu[0] and 0 otherwise.
double posterior_clean(double loss, const SelectorParams& sel);

/// Mixture log-likelihood of `losses`, evaluated in log space.
double log_likelihood(std::span<const double> losses, const SelectorParams& sel);

/// Lower half / upper half of the sorted losses, equal priors.
SelectorParams median_split_init(std::span<const double> losses);

struct EmOptions {
  int max_iters = 100;
  double tol = 1e-6;
};

struct EmResult {
  SelectorParams params;
  int iterations = 0;
  bool converged = false;
  // A prior below 0.01 or means closer than tol. Callers treat every sample as clean.
  bool degenerate = false;
  std::vector<double> log_likelihood_trace;  // one entry per completed iteration, plus the start
};

EmResult fit_em(std::span<const double> losses, const SelectorParams& init, const EmOptions& opts = {});

/// min(0.5 * (1 + stddev / (mean + 1e-6)), 0.8).
double selector_coefficient(const ClientLossStats& stats);

struct CleanNoisySplit {
  std::vector<std::size_t> clean;  // indices into the dataset, ascending
  std::vector<std::size_t> noisy;
  std::vector<double> posteriors;  // per sample, aligned with the dataset
};

/// A sample is clean iff posterior_clean(loss) >= tau.
CleanNoisySplit split_clean_noisy(std::span<const double> losses, const SelectorParams& gss, double tau);

struct WeightedSelector {
  SelectorParams params;
  double weight = 0.0;
};

/// Weighted componentwise mean of mu, sigma2 and pi; priors renormalized,
/// ordering re-enforced. Throws std::invalid_argument on empty input.
SelectorParams aggregate_selectors(std::span<const WeightedSelector> selectors);

}  // namespace fedgsca
