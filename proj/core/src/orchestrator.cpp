#include "fedgsca/orchestrator.hpp"

#include <algorithm>
#include <future>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedgsca/csv.hpp"
#include "fedgsca/error.hpp"

namespace fedgsca {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::FedGSCA: return "fedgsca";
    case Method::FedAvgBaseline: return "fedavg";
    case Method::NoGSS: return "fedgsca-nogss";
    case Method::NoRCL: return "fedgsca-norcl";
    case Method::FixedThreshold: return "fedgsca-fixed-threshold";
    case Method::UCL: return "fedgsca-ucl";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::FedGSCA, Method::FedAvgBaseline, Method::NoGSS, Method::NoRCL, Method::FixedThreshold,
                   Method::UCL})
    if (text == to_string(m)) return m;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

MethodTraits traits_of(Method m) {
  switch (m) {
    case Method::FedGSCA: return {true, true, true, LossKind::RCL};
    case Method::FedAvgBaseline: return {false, false, false, LossKind::CE};
    case Method::NoGSS: return {true, false, false, LossKind::CE};
    case Method::NoRCL: return {true, true, true, LossKind::CE};
    case Method::FixedThreshold: return {true, true, false, LossKind::CE};
    case Method::UCL: return {true, true, true, LossKind::UCL};
  }
  return {};
}

void validate(const FedConfig& cfg) {
  if (cfg.num_clients < 1) throw ValidationError("fed.num_clients", "must be >= 1");
  if (cfg.num_classes < 2) throw ValidationError("fed.num_classes", "must be >= 2");
  if (cfg.rounds < 1) throw ValidationError("fed.rounds", "must be >= 1");
  if (!(cfg.zeta0 > 0.0 && cfg.zeta0 <= 1.0)) throw ValidationError("fed.zeta0", "must lie in (0, 1]");
  if (!(cfg.fixed_threshold > 0.0 && cfg.fixed_threshold <= 1.0))
    throw ValidationError("fed.fixed_threshold", "must lie in (0, 1]");
  if (cfg.em.max_iters < 1) throw ValidationError("fed.selector.max_iters", "must be >= 1");
  if (!(cfg.em.tol > 0.0)) throw ValidationError("fed.selector.tol", "must be > 0");
  if (cfg.credal.total_rounds != cfg.rounds)
    throw ValidationError("fed.credal.total_rounds", "must equal fed.rounds");
  validate(cfg.train);
  validate(cfg.credal);
}

namespace {

std::vector<Sample> gather(const ClientDataset& data, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data.samples[i]);
  return out;
}

}  // namespace

LocalUpdateResult local_update(int round, const ClientDataset& data, const ModelParams& global,
                               const SelectorState& selector, const FedConfig& cfg) {
  const MethodTraits traits = traits_of(cfg.method);
  const std::span<const Sample> all(data.samples);
  Rng rng(derive_seed(cfg.train.seed, {stream::kTrain, static_cast<std::uint64_t>(round),
                                       static_cast<std::uint64_t>(data.client_id)}));
  const double lr = learning_rate_at(cfg.train, round, cfg.rounds);
  const LossContext ctx{cfg.credal.alpha, beta_at(cfg.credal, round)};

  LocalUpdateResult out;
  auto& rec = out.record;
  rec.client = data.client_id;

  std::vector<Sample> train_set;
  LossKind loss = LossKind::CE;
  const bool bootstrap = round == 0 || !selector.params.has_value();

  if (traits.select_samples && !bootstrap) {
    auto losses = per_sample_ce_loss(global, all);
    rec.tau = selector_coefficient(loss_stats(losses));
    std::vector<std::size_t> clean_idx, noisy_idx;
    if (selector.degenerate) {
      clean_idx.resize(all.size());
      std::iota(clean_idx.begin(), clean_idx.end(), std::size_t{0});
    } else {
      auto split = split_clean_noisy(losses, *selector.params, rec.tau);
      clean_idx = std::move(split.clean);
      noisy_idx = std::move(split.noisy);
      rec.posteriors = std::move(split.posteriors);
      rec.flipped.reserve(all.size());
      for (const auto& s : all) rec.flipped.push_back(s.observed_label != s.true_label);
      rec.selected = true;
    }
    rec.n_clean = clean_idx.size();
    rec.n_noisy = noisy_idx.size();
    rec.delta = noise_level(rec.n_clean, rec.n_noisy);
    rec.pseudo_branch = rec.delta >= kPseudoGateDelta;

    std::vector<Sample> clean = gather(data, clean_idx);
    std::vector<Sample> pseudo;
    if (rec.pseudo_branch) {
      std::vector<Sample> noisy = gather(data, noisy_idx);
      ClassThresholds thresholds =
          traits.adaptive_threshold
              ? adaptive_thresholds(class_confidences(clean, global, cfg.num_classes, cfg.avg_divisor), cfg.zeta0)
              : fixed_thresholds(cfg.num_classes, cfg.fixed_threshold);
      pseudo = generate_pseudo(noisy, global, thresholds);
      rec.n_pseudo = pseudo.size();
      rec.n_pseudo_correct = static_cast<std::size_t>(
          std::count_if(pseudo.begin(), pseudo.end(), [](const Sample& s) { return s.observed_label == s.true_label; }));
    }
    train_set = build_train_set(all, clean, pseudo, rec.delta);
    loss = traits.loss;
  } else {
    train_set.assign(all.begin(), all.end());
  }
  rec.n_train = train_set.size();

  out.params = train_epochs(global, train_set, cfg.train.local_epochs, cfg.train.batch_size, lr,
                            cfg.train.weight_decay, loss, ctx, rng);
  if (!out.params.all_finite())
    throw TrainingError("round " + std::to_string(round) + " client " + std::to_string(data.client_id) +
                        ": non-finite parameters after local training");

  if (!traits.select_samples) return out;

  auto local_losses = per_sample_ce_loss(out.params, all);
  const bool warm = selector.params.has_value() && !selector.degenerate;
  const SelectorParams init = warm ? *selector.params : median_split_init(local_losses);
  EmResult em = fit_em(local_losses, init, cfg.em);
  rec.degenerate_fit = em.degenerate;
  rec.has_selector = true;
  if (em.degenerate) {
    // Upload the previous global selector instead of a collapsed fit.
    rec.uploaded = warm ? *selector.params : init;
    out.selector = SelectorState{rec.uploaded, true};
  } else {
    rec.uploaded = em.params;
    out.selector = SelectorState{em.params, false};
  }
  return out;
}

double stability_metric(std::span<const ModelParams> locals, const ModelParams& global) {
  if (locals.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : locals) s += squared_distance(m, global);
  return s / static_cast<double>(locals.size());
}

MetricsRecord evaluate(const ModelParams& params, const ClientDataset& test, int num_classes) {
  std::vector<int> pred, truth;
  pred.reserve(test.size());
  truth.reserve(test.size());
  for (const auto& s : test.samples) {
    auto p = predict_proba(params, s.features);
    pred.push_back(static_cast<int>(argmax(p)));
    truth.push_back(s.true_label);
  }
  return macro_metrics(pred, truth, num_classes);
}

RunResult run(const FedConfig& cfg, std::span<const ClientDataset> clients, const ClientDataset& test,
              const RoundCallback& on_round) {
  validate(cfg);
  if (static_cast<int>(clients.size()) != cfg.num_clients)
    throw ValidationError("fed.num_clients", "expected " + std::to_string(cfg.num_clients) + " datasets, got " +
                                                 std::to_string(clients.size()));
  for (const auto& c : clients)
    if (c.samples.empty()) throw ValidationError("data", "client " + std::to_string(c.client_id) + " has no samples");

  const MethodTraits traits = traits_of(cfg.method);
  const int K = cfg.num_clients;
  Architecture arch{static_cast<int>(clients.front().samples.front().features.size()), cfg.train.hidden,
                    cfg.num_classes};

  RunResult result;
  ModelParams global = init_params(arch, cfg.train.seed);
  SelectorState gss;
  std::vector<SelectorState> own(K);

  for (int t = 0; t < cfg.rounds; ++t) {
    std::vector<LocalUpdateResult> updates(K);
    auto task = [&](int k) {
      return local_update(t, clients[k], global, traits.aggregate_selectors ? gss : own[k], cfg);
    };
    if (cfg.parallel_clients && K > 1) {
      std::vector<std::future<LocalUpdateResult>> futures;
      futures.reserve(K);
      for (int k = 0; k < K; ++k) futures.push_back(std::async(std::launch::async, task, k));
      for (int k = 0; k < K; ++k) updates[k] = futures[k].get();
    } else {
      for (int k = 0; k < K; ++k) updates[k] = task(k);
    }

    std::vector<ModelParams> locals;
    std::vector<WeightedModel> weighted;
    locals.reserve(K);
    for (int k = 0; k < K; ++k) locals.push_back(updates[k].params);
    for (int k = 0; k < K; ++k) {
      const double w = cfg.weights == AggregationWeights::OriginalSize
                           ? static_cast<double>(clients[k].size())
                           : static_cast<double>(std::max<std::size_t>(updates[k].record.n_train, 1));
      weighted.push_back({&locals[k], w});
    }
    ModelParams next = fedavg_combine(weighted);
    if (!next.all_finite()) throw TrainingError("round " + std::to_string(t) + ": aggregated model is not finite");

    RoundLog log;
    log.round = t;
    log.method = cfg.method;
    log.learning_rate = learning_rate_at(cfg.train, t, cfg.rounds);
    log.beta = beta_at(cfg.credal, t);
    log.stability = stability_metric(locals, global);

    if (traits.select_samples) {
      if (traits.aggregate_selectors) {
        std::vector<WeightedSelector> sels;
        bool all_degenerate = true;
        for (int k = 0; k < K; ++k) {
          sels.push_back({updates[k].record.uploaded, static_cast<double>(clients[k].size())});
          all_degenerate = all_degenerate && updates[k].selector.degenerate;
        }
        gss = SelectorState{aggregate_selectors(sels), all_degenerate};
      } else {
        for (int k = 0; k < K; ++k) own[k] = updates[k].selector;
      }
    }

    std::vector<double> posteriors;
    std::vector<bool> flipped;
    double delta_sum = 0.0, tau_sum = 0.0;
    int n_split = 0;
    std::size_t n_pseudo = 0, n_pseudo_correct = 0;
    for (auto& u : updates) {
      const auto& r = u.record;
      if (t > 0 && traits.select_samples && (r.selected || r.n_clean + r.n_noisy > 0)) {
        delta_sum += r.delta;
        tau_sum += r.tau;
        ++n_split;
      }
      posteriors.insert(posteriors.end(), r.posteriors.begin(), r.posteriors.end());
      flipped.insert(flipped.end(), r.flipped.begin(), r.flipped.end());
      n_pseudo += r.n_pseudo;
      n_pseudo_correct += r.n_pseudo_correct;
    }
    if (n_split > 0) {
      log.mean_delta = delta_sum / n_split;
      log.mean_tau = tau_sum / n_split;
    }
    if (!posteriors.empty()) log.selection_auroc = selection_quality(posteriors, flipped);
    if (n_pseudo > 0) log.pseudo_acc = static_cast<double>(n_pseudo_correct) / static_cast<double>(n_pseudo);

    global = std::move(next);
    MetricsRecord m = evaluate(global, test, cfg.num_classes);
    log.macro_f1 = m.macro_f1;
    log.macro_recall = m.macro_recall;
    log.macro_precision = m.macro_precision;
    for (auto& u : updates) log.clients.push_back(std::move(u.record));
    if (on_round) on_round(log);
    result.rounds.push_back(std::move(log));
  }

  result.final_metrics = evaluate(global, test, cfg.num_classes);
  if (!result.rounds.empty()) {
    result.final_metrics.selection_auroc = result.rounds.back().selection_auroc;
    result.final_metrics.pseudo_accuracy = result.rounds.back().pseudo_acc;
  }
  result.global = std::move(global);
  result.selector = gss;
  return result;
}

std::string format_round_row(const RoundLog& log) {
  std::ostringstream row;
  row << log.round << ',' << to_string(log.method) << ',' << csv::format_double(log.macro_f1) << ','
      << csv::format_double(log.macro_recall) << ',' << csv::format_double(log.macro_precision) << ','
      << csv::format_double(log.stability) << ',' << csv::format_optional(log.mean_delta) << ','
      << csv::format_optional(log.mean_tau) << ',' << csv::format_optional(log.selection_auroc) << ','
      << csv::format_optional(log.pseudo_acc);
  return row.str();
}

void write_rounds_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kRoundsCsvHeader << '\n';
  for (const auto& r : rounds) out << format_round_row(r) << '\n';
}

void write_clients_csv(const std::filesystem::path& path, std::span<const RoundLog> rounds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round,client,tau,delta,n_clean,n_noisy,n_pseudo,pseudo_acc,n_train,pseudo_branch,degenerate,"
         "mu_clean,mu_noisy,sigma2_clean,sigma2_noisy,pi_clean,pi_noisy\n";
  for (const auto& r : rounds) {
    for (const auto& c : r.clients) {
      const bool split = c.n_clean + c.n_noisy > 0;
      std::optional<double> pacc;
      if (c.n_pseudo > 0) pacc = static_cast<double>(c.n_pseudo_correct) / static_cast<double>(c.n_pseudo);
      out << r.round << ',' << c.client << ',' << (split ? csv::format_double(c.tau) : "") << ','
          << (split ? csv::format_double(c.delta) : "") << ',' << c.n_clean << ',' << c.n_noisy << ','
          << c.n_pseudo << ',' << csv::format_optional(pacc) << ',' << c.n_train << ',' << (c.pseudo_branch ? 1 : 0)
          << ',' << (c.degenerate_fit ? 1 : 0);
      for (int g = 0; g < 2; ++g) out << ',' << (c.has_selector ? csv::format_double(c.uploaded.mu[g]) : "");
      for (int g = 0; g < 2; ++g) out << ',' << (c.has_selector ? csv::format_double(c.uploaded.sigma2[g]) : "");
      for (int g = 0; g < 2; ++g) out << ',' << (c.has_selector ? csv::format_double(c.uploaded.pi[g]) : "");
      out << '\n';
    }
  }
}

}  // namespace fedgsca
