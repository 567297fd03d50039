// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "sul/digest.hpp"
#include "sul/error.hpp"
#include "sul/harness.hpp"

using namespace sul;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
[data]
source = synthetic
num_subjects = 10
clips_min = 4
clips_max = 7
feature_dim = 4
num_classes = 2
class_separation = 3.0
seed = 3
eval_fraction = 0.3

[corruption]
num_targets = 2
flip_rate = 0.9
flip_mode = uniform

[model]
hidden_dim = 4

[protocol]
epochs = 6
batch_size = 8
learning_rate = 0.15
selection = final-epoch

[unlearn]
lambda_cons = 1.0
lambda_forg = 0.25
lambda_reg = 0.05
steps_fraction = 0.25
learning_rate_scale = 0.2
batch_r = 8
batch_f = 8

[short_ft]
epochs_fraction = 0.2
learning_rate_scale = 0.2

[scenario]
ks = 1,2
seeds = 1,2
output_dir = out
formats = csv,json
)";

ScenarioConfig tiny_config() {
  return scenario_config_from_map(parse_config_text(kTinyConfig, "tiny"));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parser handles sections, comments and errors") {
  const ConfigMap map = parse_config_text("# comment\n[a]\nx = 1 # trailing\ny = two\n", "t");
  CHECK(map.at("a").at("x") == "1");
  CHECK(map.at("a").at("y") == "two");

  CHECK_THROWS_AS(parse_config_text("x = 1\n", "t"), Error);          // key outside section
  CHECK_THROWS_AS(parse_config_text("[a\nx = 1\n", "t"), Error);      // malformed header
  CHECK_THROWS_AS(parse_config_text("[a]\nno_equals\n", "t"), Error); // missing =
  CHECK_THROWS_AS(parse_config_text("[a]\nx = 1\nx = 2\n", "t"), Error);  // duplicate

  try {
    scenario_config_from_map(parse_config_text("[nope]\nx = 1\n", "t"));
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}

TEST_CASE("flip modes parse from config") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["corruption"]["flip_mode"] = "fixed:2";
  const ScenarioConfig fixed = scenario_config_from_map(map);
  CHECK(fixed.corruption.profile.flip_mode == FlipMode::FixedTargetClass);
  CHECK(fixed.corruption.profile.fixed_target_class == 2);
  map["corruption"]["flip_mode"] = "fixed:x";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
  map["corruption"]["flip_mode"] = "sometimes";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
}

TEST_CASE("scenario config validation") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["scenario"]["ks"] = "3,2";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
  map["scenario"]["ks"] = "0,2";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
  map["scenario"]["ks"] = "1,2";
  map["scenario"]["seeds"] = "";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
  map["scenario"]["seeds"] = "1";
  map["protocol"]["epochs"] = "0";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
  map["protocol"]["epochs"] = "4";
  map["data"]["eval_fraction"] = "1.5";
  CHECK_THROWS_AS(scenario_config_from_map(map), Error);
}

TEST_CASE("a tiny scenario populates every cell") {
  const ScenarioConfig config = tiny_config();
  const ScenarioReport report = run_scenario(config);
  REQUIRE(report.seeds.size() == 2);
  for (const SeedReport& sr : report.seeds) {
    CHECK(sr.ok);
    CHECK(sr.ranking.size() == sr.train_subjects);
    CHECK(sr.corruption_targets.size() == 2);
    REQUIRE(sr.cells.size() == 2);
    for (const CellReport& cell : sr.cells) {
      CHECK(cell.unlearned.ok);
      CHECK(cell.oracle.ok);
      CHECK(cell.naive.ok);
      CHECK(cell.forget_set.subjects.size() == static_cast<std::size_t>(cell.k));
      CHECK(!cell.forget_set_hash.empty());
      CHECK(cell.unlearned.rel_compute > 0.0);
      CHECK(cell.corrupted_overlap >= 0);
    }
  }
  CHECK(report.aggregates.size() == 2);
  CHECK(report.marginals.size() == 2);
}

TEST_CASE("phase ordering: forget-sets are recorded before oracle arms start") {
  const ScenarioReport report = run_scenario(tiny_config());
  for (const SeedReport& sr : report.seeds) {
    for (const CellReport& cell : sr.cells) {
      const std::string prefix =
          "seed=" + std::to_string(sr.seed) + " k=" + std::to_string(cell.k);
      const auto find_event = [&](const std::string& needle) {
        for (std::size_t i = 0; i < report.events.size(); ++i)
          if (report.events[i].rfind(prefix, 0) == 0 &&
              report.events[i].find(needle) != std::string::npos)
            return static_cast<long>(i);
        return -1L;
      };
      const long recorded = find_event("forget_set_recorded");
      const long oracle_started = find_event("oracle_arm_started");
      REQUIRE(recorded >= 0);
      REQUIRE(oracle_started >= 0);
      CHECK(recorded < oracle_started);
    }
  }
}

TEST_CASE("scenario reports are byte-identical across reruns") {
  const ScenarioConfig config = tiny_config();
  const std::string a = report_to_json(run_scenario(config));
  const std::string b = report_to_json(run_scenario(config));
  CHECK(a == b);
}

TEST_CASE("a failing naive arm leaves its siblings populated") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["short_ft"]["epochs"] = "0";  // rejected by the trainer inside the arm
  const ScenarioConfig config = scenario_config_from_map(map);
  const ScenarioReport report = run_scenario(config);
  for (const SeedReport& sr : report.seeds) {
    REQUIRE(sr.ok);
    for (const CellReport& cell : sr.cells) {
      CHECK(cell.unlearned.ok);
      CHECK(cell.oracle.ok);
      CHECK(!cell.naive.ok);
      CHECK(!cell.naive.error.empty());
    }
  }
  for (const KAggregate& agg : report.aggregates) CHECK(agg.complete_cells == 0);
}

TEST_CASE("oversized k rejects the whole scenario") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["scenario"]["ks"] = "1,7";  // only 7 training subjects
  const ScenarioConfig config = scenario_config_from_map(map);
  try {
    run_scenario(config);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("training subject count") != std::string::npos);
  }
}

TEST_CASE("a single valid k below the subject count is accepted") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["scenario"]["ks"] = "1";
  map["scenario"]["seeds"] = "1";
  const ScenarioReport report = run_scenario(scenario_config_from_map(map));
  CHECK(report.seeds.front().ok);
}

TEST_CASE("explicit corruption targets must be training subjects") {
  ConfigMap map = parse_config_text(kTinyConfig, "tiny");
  map["corruption"].erase("num_targets");
  map["corruption"]["target_ids"] = "not_a_subject";
  const ScenarioConfig config = scenario_config_from_map(map);
  CHECK_THROWS_AS(run_scenario(config), Error);
}

TEST_CASE("json emission writes exactly report.json and manifest.json") {
  const ScenarioReport report = run_scenario(tiny_config());
  const fs::path dir = fresh_dir("sul_t_emit_json");
  const auto written = emit_report(report, dir.string(), {"json"});
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    names.insert(entry.path().filename().string());
  CHECK(names == std::set<std::string>{"report.json", "manifest.json"});

  // manifest content hash matches a recomputation over report.json bytes
  const std::string report_bytes = slurp((dir / "report.json").string());
  Digest digest;
  digest.add_bytes(report_bytes.data(), report_bytes.size());
  const std::string manifest = slurp((dir / "manifest.json").string());
  CHECK(manifest.find(digest.hex()) != std::string::npos);
  CHECK(written.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("csv emission produces the documented table set and row order") {
  const ScenarioReport report = run_scenario(tiny_config());
  const fs::path dir = fresh_dir("sul_t_emit_csv");
  emit_report(report, dir.string(), {"csv", "json"});
  for (const char* name : {"ranking_1.csv", "ranking_2.csv", "main_table_1_1.csv",
                           "main_table_1_2.csv", "main_table_2_1.csv", "main_table_2_2.csv",
                           "sensitivity.csv", "marginals.csv", "tradeoff.csv", "report.json",
                           "manifest.json"})
    CHECK(fs::exists(dir / name));

  std::ifstream table(dir / "main_table_1_1.csv");
  std::string line;
  std::getline(table, line);
  CHECK(line == "method,accuracy,ogr,rel_compute");
  std::getline(table, line);
  CHECK(line.rfind("baseline,", 0) == 0);
  std::getline(table, line);
  CHECK(line.rfind("naive,", 0) == 0);
  std::getline(table, line);
  CHECK(line.rfind("unlearned,", 0) == 0);
  std::getline(table, line);
  CHECK(line.rfind("oracle,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("emission fails before writing anything to an unwritable path") {
  const ScenarioReport report = run_scenario(tiny_config());
  // a regular file where the directory should go blocks even a root process
  const fs::path blocker = fs::temp_directory_path() / "sul_t_emit_blocker";
  std::ofstream(blocker.string()) << "x";
  const fs::path dir = blocker / "out";
  bool threw = false;
  try {
    emit_report(report, dir.string(), {"json"});
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::Io;
  }
  CHECK(threw);
  CHECK(!fs::exists(dir / "report.json"));
  fs::remove(blocker);
}

TEST_CASE("report json round-trips") {
  const ScenarioReport report = run_scenario(tiny_config());
  const std::string once = report_to_json(report);
  const ScenarioReport parsed = report_from_json(once);
  CHECK(report_to_json(parsed) == once);
}

TEST_CASE("sweep series reproduces table-shaped numbers verbatim") {
  // one-seed report carrying the published sensitivity numbers (percent/100)
  ScenarioReport report;
  report.config = tiny_config();
  SeedReport sr;
  sr.seed = 1;
  sr.ok = true;
  sr.baseline_eval.accuracy = 0.6891;
  const double unl[3] = {0.6975, 0.7049, 0.7012};
  const double ora[3] = {0.6993, 0.7068, 0.7040};
  const int ks[3] = {1, 3, 5};
  for (int i = 0; i < 3; ++i) {
    CellReport cell;
    cell.seed = 1;
    cell.k = ks[i];
    cell.unlearned.ok = true;
    cell.unlearned.eval.accuracy = unl[i];
    cell.oracle.ok = true;
    cell.oracle.eval.accuracy = ora[i];
    cell.forgetting_valid = true;
    cell.forgetting_strength = 0.41 + 0.1 * i;
    sr.cells.push_back(cell);
  }
  report.seeds.push_back(sr);
  for (int i = 0; i < 3; ++i) {
    KAggregate agg;
    agg.k = ks[i];
    agg.complete_cells = 1;
    report.aggregates.push_back(agg);
  }

  const SweepSeries series = sweep_to_series(report);
  REQUIRE(series.accuracy.size() == 2);  // seed_1 + mean
  const auto& seed_series = series.accuracy[0];
  CHECK(seed_series.first == "seed_1");
  REQUIRE(seed_series.second.size() == 3);
  CHECK(seed_series.second[1].oracle == doctest::Approx(0.7068));
  // aggregated equals the per-seed series for a single seed
  const auto& mean_series = series.accuracy[1];
  CHECK(mean_series.first == "mean");
  for (int i = 0; i < 3; ++i) {
    CHECK(mean_series.second[i].baseline == doctest::Approx(seed_series.second[i].baseline));
    CHECK(mean_series.second[i].unlearned == doctest::Approx(seed_series.second[i].unlearned));
    CHECK(mean_series.second[i].oracle == doctest::Approx(seed_series.second[i].oracle));
  }

  const fs::path dir = fresh_dir("sul_t_series");
  emit_series_csv(series, dir.string());
  const std::string text = slurp((dir / "series_accuracy.csv").string());
  CHECK(text.find("seed_1,1,68.91,69.75,69.93") != std::string::npos);
  CHECK(text.find("seed_1,3,68.91,70.49,70.68") != std::string::npos);
  CHECK(text.find("seed_1,5,68.91,70.12,70.40") != std::string::npos);
  const std::string trade = slurp((dir / "series_tradeoff.csv").string());
  CHECK(trade.find("seed_1,1,0.410000,69.75") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep series requires at least two forget-set sizes") {
  ScenarioReport report;
  report.config = tiny_config();
  KAggregate agg;
  agg.k = 3;
  report.aggregates.push_back(agg);
  CHECK_THROWS_AS(sweep_to_series(report), Error);
}

TEST_CASE("tradeoff scatter x values equal the recorded forgetting strengths") {
  const ScenarioReport report = run_scenario(tiny_config());
  const SweepSeries series = sweep_to_series(report);
  for (const auto& [label, points] : series.tradeoff) {
    if (label == "mean") continue;
    const std::uint64_t seed = std::stoull(label.substr(5));
    for (const auto& point : points) {
      for (const SeedReport& sr : report.seeds) {
        if (sr.seed != seed) continue;
        for (const CellReport& cell : sr.cells)
          if (cell.k == point.k)
            CHECK(point.forgetting_strength == doctest::Approx(cell.forgetting_strength));
      }
    }
  }
}

TEST_CASE("aggregated series is the mean of per-seed series") {
  const ScenarioReport report = run_scenario(tiny_config());
  const SweepSeries series = sweep_to_series(report);
  const auto& mean_series = series.accuracy.back();
  REQUIRE(mean_series.first == "mean");
  for (const auto& point : mean_series.second) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [label, points] : series.accuracy) {
      if (label == "mean") continue;
      for (const auto& p : points)
        if (p.k == point.k) {
          sum += p.unlearned;
          ++n;
        }
    }
    CHECK(point.unlearned == doctest::Approx(sum / n).epsilon(1e-12));
  }
}

TEST_CASE("stage seeds and prepared data are deterministic per replicate") {
  const ScenarioConfig config = tiny_config();
  const StageSeeds a = make_stage_seeds(config, 1);
  const StageSeeds b = make_stage_seeds(config, 1);
  const StageSeeds c = make_stage_seeds(config, 2);
  CHECK(a.train == b.train);
  CHECK(a.pool == b.pool);
  CHECK(a.train != c.train);

  const PreparedData d1 = prepare_data(config, 1);
  const PreparedData d2 = prepare_data(config, 1);
  CHECK(d1.manifest.train_subjects == d2.manifest.train_subjects);
  CHECK(d1.corruption_targets == d2.corruption_targets);
  for (const auto& sid : d1.corruption_targets)
    CHECK(d1.manifest.train_subjects.count(sid) == 1);
}
