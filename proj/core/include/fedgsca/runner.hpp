#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedgsca/manifest.hpp"
#include "fedgsca/orchestrator.hpp"

namespace fedgsca {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

struct TrialOutcome {
  int trial = 0;
  RunResult result;
  std::filesystem::path directory;
};

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single trial
  std::vector<double> values;
};

SummaryStat summarize(std::vector<double> values);

/// Mean of a column over the final fraction of rounds (at least one row).
double tail_mean(std::span<const RoundLog> rounds, double fraction, double RoundLog::*field);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> trials;
};

void apply(const RunOverrides& overrides, RunManifest& manifest);

/// Generates, corrupts and trains one trial; writes its artifacts under
/// `<output_dir>/trial_<i>/`.
TrialOutcome run_trial(const RunManifest& manifest, int trial);

/// Executes every trial and writes the cross-trial `summary.json`.
/// Returns the per-trial outcomes.
std::vector<TrialOutcome> run_manifest(const RunManifest& manifest, std::ostream* progress = nullptr);

int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& manifest, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err);
int cmd_compare(const std::vector<std::filesystem::path>& manifests, const std::filesystem::path& table_out,
                const RunOverrides& overrides, std::ostream& out, std::ostream& err);
int cmd_plotdata(const std::filesystem::path& run_dir, const std::vector<std::string>& series,
                 const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err);

}  // namespace fedgsca
