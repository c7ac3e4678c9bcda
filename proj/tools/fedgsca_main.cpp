// fedgsca: run federated noisy-label experiments from JSON manifests.
//
//   fedgsca validate <manifest.json>
//   fedgsca run <manifest.json> [--seed N] [--out DIR] [--trials N]
//   fedgsca compare <a.json> <b.json> ... --table table.csv [--seed N] [--trials N]
//   fedgsca plotdata <run_dir> [--series a,b] [--out plot.csv]
//
// Exit codes: 0 ok, 1 validation error, 2 runtime failure.

#include <iostream>

#include <CLI11.hpp>

#include "fedgsca/runner.hpp"

int main(int argc, char** argv) {
  using namespace fedgsca;

  CLI::App app{"Federated learning with noisy labels: global sample selection and credal labeling"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::vector<std::string> manifest_paths;
  std::string run_dir, table_out = "compare.csv", plot_out;
  std::vector<std::string> series;
  std::uint64_t seed = 0;
  std::string out_dir;
  int trials = 0;

  auto* validate_cmd = app.add_subcommand("validate", "Check a manifest without running it");
  validate_cmd->add_option("manifest", manifest_path, "Manifest JSON")->required();

  auto* run_cmd = app.add_subcommand("run", "Run every trial of a manifest");
  run_cmd->add_option("manifest", manifest_path, "Manifest JSON")->required();
  auto* run_seed = run_cmd->add_option("--seed", seed, "Override the base seed");
  auto* run_out = run_cmd->add_option("--out", out_dir, "Override the output directory");
  auto* run_trials = run_cmd->add_option("--trials", trials, "Override the number of trials");

  auto* compare_cmd = app.add_subcommand("compare", "Run several methods on one shared fixture");
  compare_cmd->add_option("manifests", manifest_paths, "Manifest JSON files")->required();
  compare_cmd->add_option("--table", table_out, "Comparison table CSV")->capture_default_str();
  auto* cmp_seed = compare_cmd->add_option("--seed", seed, "Override the base seed of every manifest");
  auto* cmp_trials = compare_cmd->add_option("--trials", trials, "Override the number of trials");

  auto* plot_cmd = app.add_subcommand("plotdata", "Reshape rounds.csv into long format round,series,value");
  plot_cmd->add_option("run_dir", run_dir, "Trial directory or run output directory")->required();
  plot_cmd->add_option("--series", series, "Columns to export (default: all metric columns)")->delimiter(',');
  plot_cmd->add_option("--out", plot_out, "Output CSV (default: <run_dir>/plotdata.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  RunOverrides overrides;
  if (*validate_cmd) return cmd_validate(manifest_path, std::cout, std::cerr);
  if (*run_cmd) {
    if (*run_seed) overrides.seed = seed;
    if (*run_out) overrides.output_dir = out_dir;
    if (*run_trials) overrides.trials = trials;
    return cmd_run(manifest_path, overrides, std::cout, std::cerr);
  }
  if (*compare_cmd) {
    if (*cmp_seed) overrides.seed = seed;
    if (*cmp_trials) overrides.trials = trials;
    std::vector<std::filesystem::path> paths(manifest_paths.begin(), manifest_paths.end());
    return cmd_compare(paths, table_out, overrides, std::cout, std::cerr);
  }
  if (*plot_cmd) {
    std::filesystem::path out = plot_out.empty() ? std::filesystem::path(run_dir) / "plotdata.csv" : std::filesystem::path(plot_out);
    return cmd_plotdata(run_dir, series, out, std::cout, std::cerr);
  }
  return kExitValidation;
}
