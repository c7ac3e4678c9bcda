#include "fedgsca/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fedgsca/error.hpp"

namespace fedgsca {

void validate(const SelectorParams& sel) {
  if (std::abs(sel.pi[0] + sel.pi[1] - 1.0) > 1e-9) throw ValidationError("selector.pi", "priors must sum to 1");
  for (int g = 0; g < 2; ++g) {
    if (!(sel.pi[g] > 0.0 && sel.pi[g] < 1.0)) throw ValidationError("selector.pi", "priors must lie in (0, 1)");
    if (!(sel.sigma2[g] >= kVarianceFloor)) throw ValidationError("selector.sigma2", "variance below floor");
    if (!std::isfinite(sel.mu[g])) throw ValidationError("selector.mu", "must be finite");
  }
  if (sel.mu[0] > sel.mu[1]) throw ValidationError("selector.mu", "clean component must have the smaller mean");
}

SelectorParams ordered(SelectorParams sel) {
  if (sel.mu[0] > sel.mu[1]) {
    std::swap(sel.mu[0], sel.mu[1]);
    std::swap(sel.sigma2[0], sel.sigma2[1]);
    std::swap(sel.pi[0], sel.pi[1]);
  }
  return sel;
}

ClientLossStats loss_stats(std::span<const double> losses) {
  ClientLossStats st;
  if (losses.empty()) return st;
  const double n = static_cast<double>(losses.size());
  st.mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double ss = 0.0;
  for (double l : losses) ss += (l - st.mean) * (l - st.mean);
  st.stddev = std::sqrt(ss / n);
  return st;
}

double gaussian_pdf(double x, double mu, double sigma2) {
  const double d = x - mu;
  return std::exp(-d * d / (2.0 * sigma2)) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

double posterior_clean(double loss, const SelectorParams& sel) {
  const double w_clean = sel.pi[0] * gaussian_pdf(loss, sel.mu[0], sel.sigma2[0]);
  const double w_noisy = sel.pi[1] * gaussian_pdf(loss, sel.mu[1], sel.sigma2[1]);
  const double total = w_clean + w_noisy;
  if (!(total > 0.0)) return std::abs(loss - sel.mu[0]) <= std::abs(loss - sel.mu[1]) ? 1.0 : 0.0;
  return w_clean / total;
}

double log_likelihood(std::span<const double> losses, const SelectorParams& sel) {
  double ll = 0.0;
  for (double x : losses) {
    std::array<double, 2> lw{};
    for (int g = 0; g < 2; ++g) {
      const double d = x - sel.mu[g];
      lw[g] = std::log(sel.pi[g]) - d * d / (2.0 * sel.sigma2[g]) -
              0.5 * std::log(2.0 * std::numbers::pi * sel.sigma2[g]);
    }
    const double m = std::max(lw[0], lw[1]);
    ll += m + std::log(std::exp(lw[0] - m) + std::exp(lw[1] - m));
  }
  return ll;
}

namespace {

std::pair<double, double> mean_var(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::max(ss / n, kVarianceFloor)};
}

double max_change(const SelectorParams& a, const SelectorParams& b) {
  double m = 0.0;
  for (int g = 0; g < 2; ++g) {
    m = std::max(m, std::abs(a.mu[g] - b.mu[g]));
    m = std::max(m, std::abs(a.sigma2[g] - b.sigma2[g]));
    m = std::max(m, std::abs(a.pi[g] - b.pi[g]));
  }
  return m;
}

}  // namespace

SelectorParams median_split_init(std::span<const double> losses) {
  if (losses.size() < 2) throw std::invalid_argument("median_split_init: need at least two losses");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t half = sorted.size() / 2;
  auto [m0, v0] = mean_var(std::span<const double>(sorted).first(half));
  auto [m1, v1] = mean_var(std::span<const double>(sorted).subspan(half));
  SelectorParams s;
  s.mu = {m0, m1};
  s.sigma2 = {v0, v1};
  s.pi = {0.5, 0.5};
  return s;
}

EmResult fit_em(std::span<const double> losses, const SelectorParams& init, const EmOptions& opts) {
  if (losses.size() < 2) throw std::invalid_argument("fit_em: need at least two losses");
  const std::size_t n = losses.size();
  EmResult r;
  r.params = init;
  r.log_likelihood_trace.push_back(log_likelihood(losses, r.params));
  std::vector<double> gamma(n);

  for (int it = 0; it < opts.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) gamma[i] = posterior_clean(losses[i], r.params);

    std::array<double, 2> weight{0.0, 0.0};
    std::array<double, 2> sum{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      weight[0] += gamma[i];
      weight[1] += 1.0 - gamma[i];
      sum[0] += gamma[i] * losses[i];
      sum[1] += (1.0 - gamma[i]) * losses[i];
    }
    if (!(weight[0] > 0.0) || !(weight[1] > 0.0)) {
      // One component lost every sample.
      r.params.pi = {weight[0] / static_cast<double>(n), weight[1] / static_cast<double>(n)};
      r.iterations = it + 1;
      r.degenerate = true;
      r.params = ordered(r.params);
      return r;
    }
    SelectorParams next;
    for (int g = 0; g < 2; ++g) next.mu[g] = sum[g] / weight[g];
    std::array<double, 2> ss{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = losses[i] - next.mu[0], d1 = losses[i] - next.mu[1];
      ss[0] += gamma[i] * d0 * d0;
      ss[1] += (1.0 - gamma[i]) * d1 * d1;
    }
    for (int g = 0; g < 2; ++g) {
      next.sigma2[g] = std::max(ss[g] / weight[g], kVarianceFloor);
      next.pi[g] = weight[g] / static_cast<double>(n);
    }

    const double change = max_change(next, r.params);
    r.params = next;
    r.iterations = it + 1;
    r.log_likelihood_trace.push_back(log_likelihood(losses, r.params));
    if (change < opts.tol) {
      r.converged = true;
      break;
    }
  }

  r.params = ordered(r.params);
  r.degenerate = std::min(r.params.pi[0], r.params.pi[1]) < 0.01 ||
                 std::abs(r.params.mu[1] - r.params.mu[0]) < opts.tol;
  return r;
}

double selector_coefficient(const ClientLossStats& stats) {
  return std::min(0.5 * (1.0 + stats.stddev / (stats.mean + kTauEpsilon)), kTauCap);
}

CleanNoisySplit split_clean_noisy(std::span<const double> losses, const SelectorParams& gss, double tau) {
  CleanNoisySplit out;
  out.posteriors.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double p = posterior_clean(losses[i], gss);
    out.posteriors.push_back(p);
    (p >= tau ? out.clean : out.noisy).push_back(i);
  }
  return out;
}

SelectorParams aggregate_selectors(std::span<const WeightedSelector> selectors) {
  if (selectors.empty()) throw std::invalid_argument("aggregate_selectors: no selectors");
  double total = 0.0;
  for (const auto& s : selectors) {
    if (!(s.weight > 0.0)) throw std::invalid_argument("aggregate_selectors: weights must be positive");
    total += s.weight;
  }
  SelectorParams out;
  out.mu = {0.0, 0.0};
  out.sigma2 = {0.0, 0.0};
  out.pi = {0.0, 0.0};
  for (const auto& s : selectors) {
    const double w = s.weight / total;
    for (int g = 0; g < 2; ++g) {
      out.mu[g] += w * s.params.mu[g];
      out.sigma2[g] += w * s.params.sigma2[g];
      out.pi[g] += w * s.params.pi[g];
    }
  }
  const double pi_sum = out.pi[0] + out.pi[1];
  out.pi = {out.pi[0] / pi_sum, out.pi[1] / pi_sum};
  for (double& v : out.sigma2) v = std::max(v, kVarianceFloor);
  return ordered(out);
}

}  // namespace fedgsca
