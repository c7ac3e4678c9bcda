#include "fedgsca/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#include <json.hpp>

#include "fedgsca/csv.hpp"
#include "fedgsca/error.hpp"
#include "fedgsca/noisegen.hpp"

namespace fedgsca {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kStabilityTail = 0.2;

// Tracked rounds.csv columns, in file order.
const std::vector<std::string>& numeric_series() {
  static const std::vector<std::string> s{"macro_f1",   "macro_recall", "macro_precision", "stability",
                                          "mean_delta", "mean_tau",     "selection_auroc", "pseudo_acc"};
  return s;
}

ordered_json stat_json(const SummaryStat& s) {
  ordered_json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["values"] = s.values;
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

SummaryStat summarize(std::vector<double> values) {
  SummaryStat s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

double tail_mean(std::span<const RoundLog> rounds, double fraction, double RoundLog::*field) {
  if (rounds.empty()) return 0.0;
  const auto n = static_cast<std::size_t>(
      std::max(1.0, std::ceil(std::round(fraction * static_cast<double>(rounds.size()) * 1e9) / 1e9)));
  const std::size_t start = rounds.size() - std::min(n, rounds.size());
  double s = 0.0;
  for (std::size_t i = start; i < rounds.size(); ++i) s += rounds[i].*field;
  return s / static_cast<double>(rounds.size() - start);
}

void apply(const RunOverrides& o, RunManifest& m) {
  if (o.seed) m.seed = *o.seed;
  if (o.output_dir) m.output_dir = *o.output_dir;
  if (o.trials) {
    m.trials = *o.trials;
    if (m.trials < 1) throw ValidationError("trials", "must be >= 1");
  }
}

TrialOutcome run_trial(const RunManifest& manifest, int trial) {
  const TrialSeeds seeds = trial_seeds(manifest.seed, trial);
  DataSpec data_spec = manifest.data;
  data_spec.seed = seeds.data;
  NoiseSpec noise = manifest.noise;
  noise.seed = seeds.noise;
  FedConfig fed = manifest.fed;
  fed.train.seed = seeds.train;

  TrialOutcome outcome;
  outcome.trial = trial;
  outcome.directory = manifest.output_dir / ("trial_" + std::to_string(trial));
  std::filesystem::create_directories(outcome.directory);

  SyntheticData data = generate(data_spec);
  FlipMask mask;
  auto noisy = corrupt(data.clients, noise, data_spec.num_classes, &mask);
  write_flip_mask_csv(outcome.directory / "flips.csv", noisy, mask);

  // Rows are flushed as rounds finish so a failing run leaves its history behind.
  std::ofstream rounds_csv(outcome.directory / "rounds.csv");
  if (!rounds_csv) throw std::runtime_error("cannot write " + (outcome.directory / "rounds.csv").string());
  rounds_csv << kRoundsCsvHeader << '\n';
  auto on_round = [&](const RoundLog& log) { rounds_csv << format_round_row(log) << '\n' << std::flush; };

  outcome.result = run(fed, noisy, data.test, on_round);
  rounds_csv.close();

  const auto& rounds = outcome.result.rounds;
  write_clients_csv(outcome.directory / "clients.csv", rounds);
  write_confusion_csv(outcome.directory / "confusion.csv", outcome.result.final_metrics.confusion);
  save_params(outcome.directory / "model.bin", outcome.result.global);

  ordered_json s;
  s["schema"] = "fedgsca.trial-summary/1";
  s["label"] = manifest.label;
  s["method"] = std::string(to_string(fed.method));
  s["trial"] = trial;
  s["seed"] = manifest.seed + static_cast<std::uint64_t>(trial);
  s["rounds"] = rounds.size();
  const auto& last = rounds.back();
  s["final"] = {{"macro_f1", last.macro_f1},
                {"macro_recall", last.macro_recall},
                {"macro_precision", last.macro_precision},
                {"stability", last.stability}};
  s["final"]["selection_auroc"] = last.selection_auroc ? ordered_json(*last.selection_auroc) : ordered_json(nullptr);
  s["final"]["pseudo_acc"] = last.pseudo_acc ? ordered_json(*last.pseudo_acc) : ordered_json(nullptr);
  s["stability_tail_fraction"] = kStabilityTail;
  s["stability_tail_mean"] = tail_mean(rounds, kStabilityTail, &RoundLog::stability);
  write_json(outcome.directory / "summary.json", s);
  return outcome;
}

std::vector<TrialOutcome> run_manifest(const RunManifest& manifest, std::ostream* progress) {
  validate(manifest);
  std::filesystem::create_directories(manifest.output_dir);
  std::vector<TrialOutcome> outcomes;
  for (int i = 0; i < manifest.trials; ++i) {
    outcomes.push_back(run_trial(manifest, i));
    if (progress) {
      const auto& last = outcomes.back().result.rounds.back();
      *progress << manifest.label << " trial " << i << ": macro_f1=" << std::fixed << std::setprecision(4)
                << last.macro_f1 << '\n';
      progress->unsetf(std::ios::floatfield);
    }
  }

  std::vector<double> f1, recall, precision, stab;
  for (const auto& o : outcomes) {
    const auto& last = o.result.rounds.back();
    f1.push_back(last.macro_f1);
    recall.push_back(last.macro_recall);
    precision.push_back(last.macro_precision);
    stab.push_back(tail_mean(o.result.rounds, kStabilityTail, &RoundLog::stability));
  }
  ordered_json s;
  s["schema"] = "fedgsca.summary/1";
  s["label"] = manifest.label;
  s["method"] = std::string(to_string(manifest.fed.method));
  s["trials"] = manifest.trials;
  s["seed"] = manifest.seed;
  s["rounds"] = manifest.fed.rounds;
  s["final"]["macro_f1"] = stat_json(summarize(f1));
  s["final"]["macro_recall"] = stat_json(summarize(recall));
  s["final"]["macro_precision"] = stat_json(summarize(precision));
  s["stability_tail_fraction"] = kStabilityTail;
  s["stability_tail_mean"] = stat_json(summarize(stab));
  write_json(manifest.output_dir / "summary.json", s);
  return outcomes;
}

int cmd_validate(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  try {
    RunManifest m = load_manifest(path);
    out << path.string() << ": ok (" << to_string(m.fed.method) << ", " << m.data.num_clients() << " clients, "
        << m.fed.rounds << " rounds, " << m.trials << " trials)\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  }
}

int cmd_run(const std::filesystem::path& path, const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  RunManifest m;
  try {
    m = load_manifest(path);
    apply(overrides, m);
    validate(m);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    run_manifest(m, &out);
    out << "wrote " << m.output_dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_compare(const std::vector<std::filesystem::path>& paths, const std::filesystem::path& table_out,
                const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  if (paths.empty()) {
    err << "compare: no manifests given\n";
    return kExitValidation;
  }
  std::vector<RunManifest> manifests;
  try {
    for (std::size_t i = 1; i < paths.size(); ++i) {
      auto diffs = fixture_differences(paths.front(), paths[i]);
      if (!diffs.empty()) {
        err << "compare: " << paths[i].string() << " does not share the fixture of " << paths.front().string()
            << ":\n";
        for (const auto& d : diffs) err << "  " << d << '\n';
        return kExitValidation;
      }
    }
    for (const auto& p : paths) {
      RunManifest m = load_manifest(p);
      RunOverrides o = overrides;
      o.output_dir.reset();
      apply(o, m);
      manifests.push_back(std::move(m));
    }
    std::set<std::filesystem::path> dirs;
    for (const auto& m : manifests)
      if (!dirs.insert(m.output_dir).second) {
        err << "compare: two manifests write to " << m.output_dir.string() << '\n';
        return kExitValidation;
      }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    struct Row {
      std::string label, method;
      int trials;
      SummaryStat f1, recall, precision, stability;
    };
    std::vector<Row> rows;
    for (const auto& m : manifests) {
      auto outcomes = run_manifest(m, &out);
      std::vector<double> f1, rec, prec, stab;
      for (const auto& o : outcomes) {
        const auto& last = o.result.rounds.back();
        f1.push_back(last.macro_f1);
        rec.push_back(last.macro_recall);
        prec.push_back(last.macro_precision);
        stab.push_back(tail_mean(o.result.rounds, kStabilityTail, &RoundLog::stability));
      }
      rows.push_back({m.label, std::string(to_string(m.fed.method)), m.trials, summarize(f1), summarize(rec),
                      summarize(prec), summarize(stab)});
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].f1.mean > rows[b].f1.mean; });
    std::vector<int> rank(rows.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r) + 1;

    if (table_out.has_parent_path()) std::filesystem::create_directories(table_out.parent_path());
    std::ofstream table(table_out);
    if (!table) throw std::runtime_error("cannot write " + table_out.string());
    table << "label,method,trials,macro_f1_mean,macro_f1_std,macro_recall_mean,macro_precision_mean,"
             "stability_tail_mean,rank\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      table << r.label << ',' << r.method << ',' << r.trials << ',' << csv::format_double(r.f1.mean) << ','
            << csv::format_double(r.f1.std) << ',' << csv::format_double(r.recall.mean) << ','
            << csv::format_double(r.precision.mean) << ',' << csv::format_double(r.stability.mean) << ','
            << rank[i] << '\n';
    }
    out << "wrote " << table_out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "compare failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_plotdata(const std::filesystem::path& run_dir, const std::vector<std::string>& series,
                 const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err) {
  const auto& known = numeric_series();
  std::vector<std::string> wanted = series.empty() ? known : series;
  for (const auto& s : wanted)
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      err << "plotdata: unknown series '" << s << "'\n";
      return kExitValidation;
    }

  // A trial directory, or a run directory holding trial_<i>/ subdirectories.
  std::vector<std::pair<std::string, std::filesystem::path>> sources;
  if (std::filesystem::exists(run_dir / "rounds.csv")) {
    sources.emplace_back("", run_dir / "rounds.csv");
  } else {
    for (int i = 0;; ++i) {
      auto p = run_dir / ("trial_" + std::to_string(i)) / "rounds.csv";
      if (!std::filesystem::exists(p)) break;
      sources.emplace_back("trial_" + std::to_string(i) + "/", p);
    }
    if (sources.size() == 1) sources.front().first.clear();
  }
  if (sources.empty()) {
    err << "plotdata: no rounds.csv under " << run_dir.string() << '\n';
    return kExitRuntime;
  }

  try {
    std::ostringstream body;
    body << "round,series,value\n";
    std::size_t rows = 0;
    for (const auto& [prefix, path] : sources) {
      auto table = csv::read_table(path);
      if (table.rows.empty()) throw std::runtime_error(path.string() + " has no data rows");
      const auto round_col = table.column("round");
      for (const auto& row : table.rows) {
        for (const auto& s : wanted) {
          const auto& cell = row[table.column(s)];
          if (cell.empty()) continue;
          body << row[round_col] << ',' << prefix << s << ',' << cell << '\n';
          ++rows;
        }
      }
    }
    if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("cannot write " + out_csv.string());
    f << body.str();
    out << "wrote " << rows << " rows to " << out_csv.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "plotdata: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace fedgsca
