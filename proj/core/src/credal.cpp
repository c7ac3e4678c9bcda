#include "fedgsca/credal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fedgsca/error.hpp"

namespace fedgsca {

namespace {
constexpr double kFloor = 1e-12;
constexpr double kMembershipSlack = 1e-12;
}  // namespace

std::string_view to_string(BetaSchedule s) {
  switch (s) {
    case BetaSchedule::Cosine: return "cosine";
    case BetaSchedule::Linear: return "linear";
    case BetaSchedule::Constant: return "constant";
  }
  return "?";
}

BetaSchedule parse_beta_schedule(std::string_view text) {
  if (text == "cosine") return BetaSchedule::Cosine;
  if (text == "linear") return BetaSchedule::Linear;
  if (text == "constant") return BetaSchedule::Constant;
  throw std::invalid_argument("unknown beta schedule '" + std::string(text) + "'");
}

void validate(const CredalConfig& cfg) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw ValidationError("fed.credal.alpha", "must lie in [0, 1)");
  if (!(cfg.beta_start >= 0.0 && cfg.beta_start <= 1.0))
    throw ValidationError("fed.credal.beta_start", "must lie in [0, 1]");
  if (!(cfg.beta_end >= 0.0 && cfg.beta_end <= cfg.beta_start))
    throw ValidationError("fed.credal.beta_end", "must lie in [0, beta_start]");
  if (cfg.total_rounds < 1) throw ValidationError("fed.rounds", "must be >= 1");
}

double beta_at(const CredalConfig& cfg, int t) {
  const double T = cfg.total_rounds;
  const double frac = std::clamp(static_cast<double>(t) / T, 0.0, 1.0);
  switch (cfg.schedule) {
    case BetaSchedule::Cosine:
      return cfg.beta_end + (cfg.beta_start - cfg.beta_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    case BetaSchedule::Linear:
      return cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac;
    case BetaSchedule::Constant:
      return cfg.beta_start;
  }
  return cfg.beta_start;
}

PossibilityVector build_possibility(int label, std::span<const double> probs, double beta, double alpha) {
  PossibilityVector pi;
  pi.alpha = alpha;
  pi.values.assign(probs.size(), alpha);
  for (std::size_t c = 0; c < probs.size(); ++c)
    if (static_cast<int>(c) == label || probs[c] >= beta) pi.values[c] = 1.0;
  return pi;
}

double implausible_mass(std::span<const double> probs, const PossibilityVector& pi) {
  double mass = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c)
    if (!pi.plausible(c)) mass += probs[c];
  return mass;
}

// For {alpha, 1}-valued possibilities every subset holding a plausible class
// has bound 1, and every subset of the implausible classes is dominated by the
// whole implausible set, so one inequality decides membership.
bool in_credal_set(std::span<const double> probs, const PossibilityVector& pi) {
  return implausible_mass(probs, pi) <= pi.alpha + kMembershipSlack;
}

std::vector<double> project(std::span<const double> probs, const PossibilityVector& pi) {
  const std::size_t C = probs.size();
  double plausible_sum = 0.0, implausible_sum = 0.0;
  std::size_t n_plausible = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (pi.plausible(c)) {
      plausible_sum += probs[c];
      ++n_plausible;
    } else {
      implausible_sum += probs[c];
    }
  }
  const std::size_t n_implausible = C - n_plausible;
  // With nothing implausible the plausible group keeps all the mass.
  const double plausible_mass = n_implausible == 0 ? 1.0 : 1.0 - pi.alpha;
  const double other_mass = n_plausible == 0 ? 1.0 : pi.alpha;

  std::vector<double> out(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    if (pi.plausible(c)) {
      out[c] = plausible_sum > 0.0 ? plausible_mass * probs[c] / plausible_sum
                                   : plausible_mass / static_cast<double>(n_plausible);
    } else {
      out[c] = implausible_sum > 0.0 ? other_mass * probs[c] / implausible_sum
                                     : other_mass / static_cast<double>(n_implausible);
    }
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] <= 0.0) continue;
    kl += p[c] * (std::log(std::max(p[c], kFloor)) - std::log(std::max(q[c], kFloor)));
  }
  return kl;
}

CredalLoss rcl_loss(std::span<const double> probs, const PossibilityVector& pi) {
  CredalLoss out;
  if (in_credal_set(probs, pi)) return out;
  out.target = project(probs, pi);
  out.loss = std::max(0.0, kl_divergence(out.target, probs));
  out.active = true;
  return out;
}

CredalLoss ucl_loss(std::span<const double> probs, int label, double beta, double alpha) {
  for (std::size_t c = 0; c < probs.size(); ++c)
    if (static_cast<int>(c) != label && probs[c] >= beta) return {};
  PossibilityVector pi;
  pi.alpha = alpha;
  pi.values.assign(probs.size(), alpha);
  pi.values[label] = 1.0;
  return rcl_loss(probs, pi);
}

}  // namespace fedgsca
