#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedgsca/csv.hpp"
#include "fedgsca/error.hpp"
#include "fedgsca/manifest.hpp"
#include "fedgsca/runner.hpp"

using namespace fedgsca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

nlohmann::json minimal(const fs::path& out) {
  auto j = nlohmann::json::parse(R"({
    "schema": "fedgsca.manifest/1",
    "seed": 3,
    "trials": 1,
    "data": {"num_classes": 2, "feature_dim": 2, "samples_per_client": [20],
             "class_proportions": [0.5, 0.5], "cluster_separation": 4.0, "test_samples": 20},
    "noise": {"per_client": [{"kind": "symmetric", "rate": 0.1}]},
    "fed": {"method": "fedgsca", "rounds": 2, "train": {"local_epochs": 1, "batch_size": 8, "learning_rate": 0.1}}
  })");
  j["output"] = out.string();
  return j;
}

fs::path write(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  auto p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal manifest runs and writes two rounds") {
  TempDir tmp("fedgsca_runner_minimal");
  auto path = write(tmp.path, "m.json", minimal(tmp.path / "out"));
  std::ostringstream out, err;
  CHECK(cmd_run(path, {}, out, err) == kExitOk);
  auto table = csv::read_table(tmp.path / "out" / "trial_0" / "rounds.csv");
  CHECK(table.rows.size() == 2);
  for (const char* f : {"summary.json", "confusion.csv", "clients.csv", "flips.csv", "model.bin"})
    CHECK(fs::exists(tmp.path / "out" / "trial_0" / f));
  CHECK(fs::exists(tmp.path / "out" / "summary.json"));
}

TEST_CASE("out-of-range noise rate is a validation error naming the field") {
  TempDir tmp("fedgsca_runner_badrate");
  auto j = minimal(tmp.path / "out");
  j["noise"]["per_client"][0]["rate"] = 1.3;
  auto path = write(tmp.path, "m.json", j);
  try {
    load_manifest(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "noise.per_client[0].rate");
  }
  std::ostringstream out, err;
  CHECK(cmd_run(path, {}, out, err) == kExitValidation);
  CHECK(err.str().find("noise.per_client[0].rate") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("other manifest errors name their fields") {
  auto field_of = [](const nlohmann::json& j) {
    try {
      parse_manifest(j.dump());
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string();
  };
  auto j = minimal("x");
  j["schema"] = "other/2";
  CHECK(field_of(j) == "schema");
  j = minimal("x");
  j["data"].erase("num_classes");
  CHECK(field_of(j) == "data.num_classes");
  j = minimal("x");
  j["fed"]["train"]["batch_size"] = 0;
  CHECK(field_of(j) == "fed.train.batch_size");
  j = minimal("x");
  j["noise"]["per_client"].push_back({{"rate", 0.1}});
  CHECK(field_of(j) == "noise.per_client");
  j = minimal("x");
  j["fed"]["method"] = "fedprox";
  CHECK(field_of(j) == "fed.method");
  CHECK_THROWS_AS(parse_manifest("{ not json"), ValidationError);
}

TEST_CASE("five trials summarize exactly five final values") {
  TempDir tmp("fedgsca_runner_trials");
  auto j = minimal(tmp.path / "out");
  j["trials"] = 5;
  auto path = write(tmp.path, "m.json", j);
  std::ostringstream out, err;
  REQUIRE(cmd_run(path, {}, out, err) == kExitOk);
  auto s = nlohmann::json::parse(slurp(tmp.path / "out" / "summary.json"));
  auto values = s["final"]["macro_f1"]["values"].get<std::vector<double>>();
  REQUIRE(values.size() == 5);
  auto stat = summarize(values);
  CHECK(s["final"]["macro_f1"]["mean"].get<double>() == doctest::Approx(stat.mean).epsilon(1e-15));
  CHECK(s["final"]["macro_f1"]["std"].get<double>() == doctest::Approx(stat.std).epsilon(1e-15));

  // Each value is the last macro_f1 row of its trial's rounds.csv.
  for (int i = 0; i < 5; ++i) {
    auto table = csv::read_table(tmp.path / "out" / ("trial_" + std::to_string(i)) / "rounds.csv");
    CHECK(std::stod(table.rows.back()[table.column("macro_f1")]) == values[i]);
    auto ts = nlohmann::json::parse(slurp(tmp.path / "out" / ("trial_" + std::to_string(i)) / "summary.json"));
    double stab = std::stod(table.rows.back()[table.column("stability")]);
    CHECK(ts["stability_tail_mean"].get<double>() == doctest::Approx(stab));
  }
}

TEST_CASE("re-running a manifest rewrites identical files") {
  TempDir tmp("fedgsca_runner_determinism");
  auto path = write(tmp.path, "m.json", minimal(tmp.path / "out"));
  std::ostringstream out, err;
  REQUIRE(cmd_run(path, {}, out, err) == kExitOk);
  auto first = slurp(tmp.path / "out" / "trial_0" / "rounds.csv");
  auto clients = slurp(tmp.path / "out" / "trial_0" / "clients.csv");
  REQUIRE(cmd_run(path, {}, out, err) == kExitOk);
  CHECK(slurp(tmp.path / "out" / "trial_0" / "rounds.csv") == first);
  CHECK(slurp(tmp.path / "out" / "trial_0" / "clients.csv") == clients);
}

TEST_CASE("overrides replace seed, output and trials") {
  TempDir tmp("fedgsca_runner_overrides");
  auto path = write(tmp.path, "m.json", minimal(tmp.path / "out"));
  RunOverrides o;
  o.seed = 11;
  o.trials = 2;
  o.output_dir = tmp.path / "elsewhere";
  std::ostringstream out, err;
  REQUIRE(cmd_run(path, o, out, err) == kExitOk);
  auto s = nlohmann::json::parse(slurp(tmp.path / "elsewhere" / "summary.json"));
  CHECK(s["seed"].get<int>() == 11);
  CHECK(s["trials"].get<int>() == 2);
  o.trials = 0;
  CHECK(cmd_run(path, o, out, err) == kExitValidation);
}

TEST_CASE("trial seeds are independent streams") {
  auto a = trial_seeds(100, 0), b = trial_seeds(100, 1), c = trial_seeds(101, 0);
  CHECK(a.data != a.noise);
  CHECK(a.noise != a.train);
  CHECK(a.data != b.data);
  CHECK(b.data == c.data);
}

TEST_CASE("compare refuses mismatched fixtures and tabulates shared ones") {
  TempDir tmp("fedgsca_runner_compare");
  auto full = minimal(tmp.path / "full");
  auto avg = minimal(tmp.path / "avg");
  avg["fed"]["method"] = "fedavg";
  auto pf = write(tmp.path, "full.json", full);
  auto pa = write(tmp.path, "avg.json", avg);

  auto other = minimal(tmp.path / "other");
  other["noise"]["per_client"][0]["rate"] = 0.3;
  other["seed"] = 4;
  auto po = write(tmp.path, "other.json", other);
  std::ostringstream out, err;
  CHECK(cmd_compare({pf, po}, tmp.path / "bad.csv", {}, out, err) == kExitValidation);
  CHECK(err.str().find("noise.per_client[0].rate") != std::string::npos);
  CHECK(err.str().find("seed") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "bad.csv"));

  REQUIRE(cmd_compare({pf, pa}, tmp.path / "two.csv", {}, out, err) == kExitOk);
  auto two = csv::read_table(tmp.path / "two.csv");
  CHECK(two.rows.size() == 2);
  CHECK(two.rows[0][two.column("method")] == "fedgsca");
  CHECK(two.rows[1][two.column("method")] == "fedavg");

  REQUIRE(cmd_compare({pf}, tmp.path / "one.csv", {}, out, err) == kExitOk);
  CHECK(csv::read_table(tmp.path / "one.csv").rows.size() == 1);
}

TEST_CASE("ablation manifests form a four-row comparison") {
  const fs::path dir = fs::path(FEDGSCA_CONFIG_DIR) / "ablation";
  std::vector<fs::path> paths;
  for (const char* n : {"full.json", "norcl.json", "fixed_threshold.json", "nogss.json"}) paths.push_back(dir / n);
  for (const auto& p : paths) REQUIRE(fs::exists(p));
  for (std::size_t i = 1; i < paths.size(); ++i) CHECK(fixture_differences(paths[0], paths[i]).empty());

  TempDir tmp("fedgsca_runner_ablation");
  RunOverrides o;
  o.trials = 1;
  // Shrink the run: compare ignores output overrides, so rewrite each manifest.
  std::vector<fs::path> small;
  for (const auto& p : paths) {
    auto j = nlohmann::json::parse(slurp(p));
    j["fed"]["rounds"] = 2;
    j["data"]["samples_per_client"] = {40, 40, 40, 40};
    j["data"]["test_samples"] = 40;
    j["output"] = (tmp.path / p.stem()).string();
    small.push_back(write(tmp.path, p.filename().string(), j));
  }
  std::ostringstream out, err;
  REQUIRE(cmd_compare(small, tmp.path / "ablation.csv", o, out, err) == kExitOk);
  auto t = csv::read_table(tmp.path / "ablation.csv");
  REQUIRE(t.rows.size() == 4);
  std::vector<std::string> methods;
  for (const auto& r : t.rows) methods.push_back(r[t.column("method")]);
  CHECK(methods == std::vector<std::string>{"fedgsca", "fedgsca-norcl", "fedgsca-fixed-threshold", "fedgsca-nogss"});
}

TEST_CASE("plotdata reshapes tracked series") {
  TempDir tmp("fedgsca_runner_plot");
  auto j = minimal(tmp.path / "out");
  j["fed"]["rounds"] = 4;
  auto path = write(tmp.path, "m.json", j);
  std::ostringstream out, err;
  REQUIRE(cmd_run(path, {}, out, err) == kExitOk);
  const auto trial = tmp.path / "out" / "trial_0";
  REQUIRE(cmd_plotdata(trial, {"macro_f1", "stability", "macro_recall"}, tmp.path / "p.csv", out, err) == kExitOk);
  auto t = csv::read_table(tmp.path / "p.csv");
  CHECK(t.header == std::vector<std::string>{"round", "series", "value"});
  CHECK(t.rows.size() == 12);

  CHECK(cmd_plotdata(trial, {"loss"}, tmp.path / "q.csv", out, err) == kExitValidation);
  CHECK(cmd_plotdata(tmp.path / "missing", {}, tmp.path / "q.csv", out, err) == kExitRuntime);

  fs::create_directories(tmp.path / "empty");
  std::ofstream(tmp.path / "empty" / "rounds.csv") << "";
  CHECK(cmd_plotdata(tmp.path / "empty", {"macro_f1"}, tmp.path / "q.csv", out, err) == kExitRuntime);
  std::ofstream(tmp.path / "empty" / "rounds.csv") << kRoundsCsvHeader << '\n';
  CHECK(cmd_plotdata(tmp.path / "empty", {"macro_f1"}, tmp.path / "q.csv", out, err) == kExitRuntime);
}

TEST_CASE("tail mean covers the final fifth of rounds") {
  std::vector<RoundLog> logs(10);
  for (int i = 0; i < 10; ++i) logs[i].stability = i;
  CHECK(tail_mean(logs, 0.2, &RoundLog::stability) == doctest::Approx(8.5));
  std::vector<RoundLog> three(3);
  three[2].stability = 6;
  CHECK(tail_mean(three, 0.2, &RoundLog::stability) == 6.0);
}

TEST_CASE("shipped manifests validate") {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(FEDGSCA_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(load_manifest(e.path()));
    ++n;
  }
  CHECK(n >= 5);
}
