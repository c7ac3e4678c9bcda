// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: fedgsca_acceptance [artifact-dir]   (default: a temporary directory, removed afterwards)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "fedgsca/credal.hpp"
#include "fedgsca/manifest.hpp"
#include "fedgsca/model.hpp"
#include "fedgsca/orchestrator.hpp"
#include "fedgsca/pseudo_label.hpp"
#include "fedgsca/rng.hpp"
#include "fedgsca/runner.hpp"
#include "fedgsca/selector.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "planted.hpp"

namespace fs = std::filesystem;
using namespace fedgsca;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double rel_err(double got, long double want) {
  const long double diff = std::fabs(static_cast<long double>(got) - want);
  const long double scale = std::max(std::fabs(want), std::fabs(static_cast<long double>(got)));
  if (scale == 0) return 0.0;
  return static_cast<double>(diff / scale);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

fs::path g_artifacts;

// Runs a shipped manifest with its output redirected under the artifact dir.
std::vector<TrialOutcome> run_config(const std::string& rel, const std::string& out_name) {
  RunManifest m = load_manifest(fs::path(FEDGSCA_CONFIG_DIR) / rel);
  m.output_dir = g_artifacts / out_name;
  return run_manifest(m);
}

std::vector<double> final_f1(const std::vector<TrialOutcome>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.result.rounds.back().macro_f1);
  return out;
}

// ---------------------------------------------------------------------------

Verdict criterion_formulas() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 200;
  double worst_tau = 0, worst_agg = 0, worst_post = 0, worst_avg = 0, worst_zeta = 0, worst_proj = 0, worst_kl = 0;

  for (int i = 0; i < n; ++i) {
    std::exponential_distribution<double> e(0.5 + 3 * unit(rng));
    std::vector<double> losses(10 + i % 50);
    for (auto& l : losses) l = e(rng);
    worst_tau = std::max(worst_tau, rel_err(selector_coefficient(loss_stats(losses)), oracle::tau(losses)));
  }

  for (int i = 0; i < n; ++i) {
    const int K = 1 + i % 7;
    std::vector<WeightedSelector> sels;
    std::vector<double> w, f[6];
    for (int k = 0; k < K; ++k) {
      SelectorParams s;
      s.mu = {unit(rng), 1.0 + 2 * unit(rng)};
      s.sigma2 = {0.01 + unit(rng), 0.01 + unit(rng)};
      const double p = 0.05 + 0.9 * unit(rng);
      s.pi = {p, 1 - p};
      const double weight = 1 + std::floor(1000 * unit(rng));
      sels.push_back({s, weight});
      w.push_back(weight);
      f[0].push_back(s.mu[0]);
      f[1].push_back(s.mu[1]);
      f[2].push_back(s.sigma2[0]);
      f[3].push_back(s.sigma2[1]);
      f[4].push_back(s.pi[0]);
      f[5].push_back(s.pi[1]);
    }
    auto g = aggregate_selectors(sels);
    const double got[6] = {g.mu[0], g.mu[1], g.sigma2[0], g.sigma2[1], g.pi[0], g.pi[1]};
    for (int j = 0; j < 6; ++j) worst_agg = std::max(worst_agg, rel_err(got[j], oracle::weighted_mean(f[j], w)));
  }

  for (int i = 0; i < n; ++i) {
    const oracle::ld mu[2] = {unit(rng), 0.5L + 2 * unit(rng)};
    const oracle::ld var[2] = {0.02L + unit(rng), 0.02L + unit(rng)};
    const double p = 0.05 + 0.9 * unit(rng);
    const oracle::ld prior[2] = {p, 1 - p};
    SelectorParams s{{static_cast<double>(mu[0]), static_cast<double>(mu[1])},
                     {static_cast<double>(var[0]), static_cast<double>(var[1])},
                     {p, 1 - p}};
    const double x = 3 * unit(rng);
    worst_post = std::max(worst_post, rel_err(posterior_clean(x, s), oracle::posterior(x, mu, var, prior)));
  }

  for (int i = 0; i < n; ++i) {
    const int C = 2 + i % 9;
    ModelParams id(Architecture{C, {}, C});
    for (int c = 0; c < C; ++c) id.values()[id.weight_offset(0) + c * C + c] = 1.0;
    std::vector<Sample> clean;
    std::vector<std::vector<double>> probs;
    for (int k = 0; k < 1 + i % 40; ++k) {
      auto p = oracle::random_simplex(rng, C);
      Sample s{k, {}, 0, 0};
      for (double v : p) s.features.push_back(std::log(v));
      probs.push_back(predict_proba(id, s.features));
      clean.push_back(std::move(s));
    }
    auto avg = class_confidences(clean, id, C);
    auto want = oracle::avg_confidence(probs, C);
    for (int c = 0; c < C; ++c) worst_avg = std::max(worst_avg, rel_err(avg[c], want[c]));
    auto zeta = adaptive_thresholds(avg, 0.8).thresholds;
    auto zwant = oracle::thresholds(want, 0.8L);
    for (int c = 0; c < C; ++c) worst_zeta = std::max(worst_zeta, rel_err(zeta[c], zwant[c]));
  }

  int kl_instances = 0;
  for (int i = 0; kl_instances < n; ++i) {
    const int C = 2 + i % 8;
    auto p = oracle::random_simplex(rng, C);
    const double alpha = 0.2 * unit(rng);
    std::vector<bool> plausible(C, false);
    plausible[i % C] = true;
    if (C > 2 && unit(rng) < 0.3) plausible[(i + 1) % C] = true;
    PossibilityVector pi;
    pi.alpha = alpha;
    for (int c = 0; c < C; ++c) pi.values.push_back(plausible[c] ? 1.0 : alpha);
    auto r = project(p, pi);
    auto rwant = oracle::projection(p, plausible, alpha);
    for (int c = 0; c < C; ++c) worst_proj = std::max(worst_proj, rel_err(r[c], rwant[c]));
    if (in_credal_set(p, pi)) continue;
    ++kl_instances;
    worst_kl = std::max(worst_kl, rel_err(rcl_loss(p, pi).loss, oracle::kl(rwant, p)));
  }

  const double secs = seconds_since(t0);
  const double worst = std::max({worst_tau, worst_agg, worst_post, worst_avg, worst_zeta, worst_proj, worst_kl});
  std::ostringstream d;
  d << n << " instances per formula; max rel err tau=" << fmt(worst_tau, 2) << " gss=" << fmt(worst_agg, 2)
    << " posterior=" << fmt(worst_post, 2) << " avg=" << fmt(worst_avg, 2) << " zeta=" << fmt(worst_zeta, 2)
    << " projection=" << fmt(worst_proj, 2) << " kl=" << fmt(worst_kl, 2) << "; " << fmt(secs, 3) << " s";
  return {worst <= 1e-9 && secs < 10.0, d.str()};
}

Verdict criterion_gradients() {
  double worst = 0;
  int checks = 0, active = 0;
  for (LossKind kind : {LossKind::CE, LossKind::RCL, LossKind::UCL})
    for (auto hidden : {std::vector<int>{}, std::vector<int>{5}})
      for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto r = testing::gradient_check(1000 + seed, kind, hidden);
        worst = std::max(worst, r.relative_error);
        active += r.active_samples;
        ++checks;
      }
  std::ostringstream d;
  d << checks << " instances (CE/RCL/UCL x linear/MLP x 25 seeds, " << active
    << " active samples); max rel err " << fmt(worst, 3);
  return {worst <= 1e-5, d.str()};
}

Verdict criterion_em() {
  double worst_mu = 0, worst_pi = 0, worst_drop = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto losses = testing::planted_losses(500 + seed, 2000, 0.2, 0.05, 2.0, 0.3);
    auto r = fit_em(losses, median_split_init(losses));
    worst_mu = std::max({worst_mu, std::abs(r.params.mu[0] - 0.2), std::abs(r.params.mu[1] - 2.0)});
    worst_pi = std::max(worst_pi, std::abs(r.params.pi[0] - 0.5));
    for (std::size_t i = 1; i < r.log_likelihood_trace.size(); ++i)
      worst_drop = std::max(worst_drop, r.log_likelihood_trace[i - 1] - r.log_likelihood_trace[i]);
  }
  std::ostringstream d;
  d << "10 seeds, n=2000, separation 6 sd; max |mu err|=" << fmt(worst_mu, 3) << " max |pi err|=" << fmt(worst_pi, 3)
    << " max log-lik decrease=" << fmt(worst_drop, 3);
  return {worst_mu <= 0.1 && worst_pi <= 0.05 && worst_drop <= 1e-9, d.str()};
}

Verdict criterion_selector_quality() {
  const auto t0 = Clock::now();
  auto runs = run_config("acceptance/sym40_rcl.json", "sym40/rcl");
  const double secs = seconds_since(t0);
  std::vector<double> auc;
  bool missing = false;
  for (const auto& r : runs) {
    const auto& log = r.result.rounds.at(10);
    if (!log.selection_auroc) missing = true;
    auc.push_back(log.selection_auroc.value_or(0.0));
  }
  std::ostringstream d;
  d << "round-10 AUROC mean over " << auc.size() << " seeds = " << fmt(mean(auc)) << " (min "
    << fmt(*std::min_element(auc.begin(), auc.end())) << "); " << fmt(secs, 3) << " s";
  return {!missing && mean(auc) > 0.9 && secs < 60.0, d.str()};
}

struct HeteroRuns {
  std::vector<TrialOutcome> fedgsca, fedavg;
  double seconds = 0;
};

Verdict criterion_direction(const HeteroRuns& h) {
  const double g = mean(final_f1(h.fedgsca)), a = mean(final_f1(h.fedavg));
  std::ostringstream d;
  d << "macro-F1 FedGSCA " << fmt(g) << " vs FedAvg " << fmt(a) << " (gap " << fmt(100 * (g - a), 3)
    << " points, need >= 5); " << fmt(h.seconds, 3) << " s";
  return {g - a >= 0.05 && h.seconds < 180.0, d.str()};
}

Verdict criterion_ablation() {
  const char* names[] = {"full", "norcl", "fixed_threshold", "nogss"};
  std::vector<double> f1;
  for (const char* n : names) f1.push_back(mean(final_f1(run_config(std::string("ablation/") + n + ".json",
                                                                      std::string("ablation/") + n))));
  bool ok = true;
  for (int i = 0; i + 1 < 4; ++i) ok = ok && f1[i] >= f1[i + 1] - 0.005;
  std::ostringstream d;
  d << "macro-F1 full " << fmt(f1[0]) << " >= noRCL " << fmt(f1[1]) << " >= noRCL+fixed " << fmt(f1[2])
    << " >= noGSS " << fmt(f1[3]) << " (0.5-point ties allowed)";
  return {ok, d.str()};
}

Verdict criterion_rcl_vs_ucl() {
  bool ok = true;
  std::ostringstream d;
  const char* sep = "";
  for (int rate : {20, 40}) {
    const std::string tag = "sym" + std::to_string(rate);
    const double r = mean(final_f1(run_config("acceptance/" + tag + "_rcl.json", tag + "/rcl")));
    const double u = mean(final_f1(run_config("acceptance/" + tag + "_ucl.json", tag + "/ucl")));
    ok = ok && r >= u;
    d << sep << rate << "%: RCL " << fmt(r, 6) << " vs UCL " << fmt(u, 6);
    sep = "; ";
  }
  return {ok, d.str()};
}

Verdict criterion_stability(const HeteroRuns& h) {
  auto tail = [](const std::vector<TrialOutcome>& runs) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(tail_mean(r.result.rounds, 0.2, &RoundLog::stability));
    return mean(v);
  };
  const double g = tail(h.fedgsca), a = tail(h.fedavg);
  return {g < a, "final-20% mean stability FedGSCA " + fmt(g) + " vs FedAvg " + fmt(a)};
}

Verdict criterion_degenerate(const HeteroRuns& h) {
  // (a) zero-noise client 0 on the heterogeneous fixture
  int low = 0, total = 0;
  for (const auto& r : h.fedgsca)
    for (const auto& log : r.result.rounds) {
      if (log.round <= 5) continue;
      ++total;
      low += log.clients.at(0).pseudo_branch ? 0 : 1;
    }
  const double frac = total ? static_cast<double>(low) / total : 0.0;

  // (b) a client whose samples are all identical has constant losses
  bool fallback = false, finished = false;
  {
    RunManifest m = load_manifest(fs::path(FEDGSCA_CONFIG_DIR) / "acceptance/hetero_fedgsca.json");
    m.fed.rounds = m.fed.credal.total_rounds = 8;
    const TrialSeeds seeds = trial_seeds(m.seed, 0);
    m.data.seed = seeds.data;
    m.noise.seed = seeds.noise;
    m.fed.train.seed = seeds.train;
    auto data = generate(m.data);
    auto clients = corrupt(data.clients, m.noise, m.data.num_classes);
    for (auto& s : clients[2].samples) {
      s.features = clients[2].samples.front().features;
      s.observed_label = s.true_label = clients[2].samples.front().true_label;
    }
    try {
      auto res = run(m.fed, clients, data.test);
      fallback = std::all_of(res.rounds.begin(), res.rounds.end(),
                             [](const RoundLog& l) { return l.clients.at(2).degenerate_fit; });
      finished = res.global.all_finite() && res.rounds.size() == 8;
    } catch (const std::exception& e) {
      std::cerr << "constant-loss run aborted: " << e.what() << '\n';
    }
  }

  // (c) single-client FedAvg against plain local training
  bool identical = false;
  {
    RunManifest m = load_manifest(fs::path(FEDGSCA_CONFIG_DIR) / "acceptance/hetero_fedavg.json");
    m.data.samples_per_client = {500};
    m.noise.per_client = {{NoiseKind::Symmetric, 0.4}};
    m.fed.num_clients = 1;
    m.fed.rounds = m.fed.credal.total_rounds = 10;
    const TrialSeeds seeds = trial_seeds(m.seed, 0);
    m.data.seed = seeds.data;
    m.noise.seed = seeds.noise;
    m.fed.train.seed = seeds.train;
    auto data = generate(m.data);
    auto clients = corrupt(data.clients, m.noise, m.data.num_classes);
    auto res = run(m.fed, clients, data.test);
    ModelParams theta = init_params(Architecture{m.data.feature_dim, {}, m.data.num_classes}, m.fed.train.seed);
    for (int t = 0; t < m.fed.rounds; ++t) {
      Rng rng(derive_seed(m.fed.train.seed, {stream::kTrain, static_cast<std::uint64_t>(t), 0}));
      theta = train_epochs(theta, clients[0].samples, m.fed.train.local_epochs, m.fed.train.batch_size,
                           learning_rate_at(m.fed.train, t, m.fed.rounds), m.fed.train.weight_decay, LossKind::CE, {},
                           rng);
    }
    identical = res.global == theta;
  }

  std::ostringstream d;
  d << "zero-noise client on delta<0.1 branch in " << low << "/" << total << " rounds after round 5 ("
    << fmt(100 * frac, 3) << "%); constant-loss client degenerate every round: " << (fallback ? "yes" : "no")
    << ", run completed: " << (finished ? "yes" : "no") << "; K=1 FedAvg bit-identical to local training: "
    << (identical ? "yes" : "no");
  return {frac >= 0.9 && fallback && finished && identical, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict criterion_determinism(const HeteroRuns& h) {
  auto again = run_config("acceptance/hetero_fedgsca.json", "hetero/fedgsca_repeat");
  int same = 0;
  for (std::size_t i = 0; i < again.size(); ++i) {
    const auto a = slurp(h.fedgsca[i].directory / "rounds.csv");
    const auto b = slurp(again[i].directory / "rounds.csv");
    same += (!a.empty() && a == b) ? 1 : 0;
  }
  return {same == static_cast<int>(again.size()) && same > 0,
          std::to_string(same) + "/" + std::to_string(again.size()) + " trials produced byte-identical rounds.csv"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool keep = argc > 1;
  g_artifacts = keep ? fs::path(argv[1])
                     : fs::temp_directory_path() / ("fedgsca_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_artifacts);

  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::cout << "CRITERION " << id << " " << (v.pass ? "PASS" : "FAIL") << " - " << title << ": " << v.detail
              << std::endl;
  };

  report(1, "formula oracles", criterion_formulas);
  report(2, "gradient checks", criterion_gradients);
  report(3, "EM recovery", criterion_em);
  report(4, "selector quality", criterion_selector_quality);

  HeteroRuns hetero;
  try {
    const auto t0 = Clock::now();
    hetero.fedgsca = run_config("acceptance/hetero_fedgsca.json", "hetero/fedgsca");
    hetero.fedavg = run_config("acceptance/hetero_fedavg.json", "hetero/fedavg");
    hetero.seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    std::cerr << "heterogeneous fixture failed: " << e.what() << '\n';
  }
  report(5, "FedGSCA beats FedAvg under 0-20-20-40% noise", [&] { return criterion_direction(hetero); });
  report(6, "ablation ordering", criterion_ablation);
  report(7, "RCL vs UCL", criterion_rcl_vs_ucl);
  report(8, "stability", [&] { return criterion_stability(hetero); });
  report(9, "degenerate inputs", [&] { return criterion_degenerate(hetero); });
  report(10, "determinism", [&] { return criterion_determinism(hetero); });

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  if (!keep) fs::remove_all(g_artifacts);
  else std::cout << "artifacts kept in " << g_artifacts.string() << std::endl;
  return failures == 0 ? 0 : 1;
}
