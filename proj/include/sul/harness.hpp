// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sul/dataset.hpp"
#include "sul/metrics.hpp"
#include "sul/scoring.hpp"
#include "sul/trainer.hpp"
#include "sul/unlearn.hpp"

namespace sul {

// ---------------------------------------------------------------------------
// Scenario configuration (plain-text config file with [section] key = value)
// ---------------------------------------------------------------------------

struct GeneratorParams {
  int num_subjects = 30;
  ClipRange clips_per_subject{10, 20};
  int feature_dim = 16;
  int num_classes = 4;
  double class_separation = 2.5;
  std::uint64_t seed = 0;  // data base seed, folded into every replicate seed
};

enum class DataSource { Synthetic, Csv };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  GeneratorParams gen;
  std::string csv_path;
  int csv_classes = 0;  // 0 = infer
  double eval_fraction = 0.2;
};

struct CorruptionConfig {
  bool enabled = false;
  int num_targets = 0;                   // picked from training subjects when ids empty
  std::vector<std::string> target_ids;   // explicit targets (must be training subjects)
  CorruptionProfile profile;
};

// Unlearning stage knobs; unset values derive from the baseline run
// (steps = ceil(fraction * baseline steps), lr = scale * protocol lr,
// batch sizes default to the protocol batch size).
struct UnlearnSpec {
  double lambda_cons = 1.0;
  double lambda_forg = 0.5;
  double lambda_reg = 0.01;
  std::optional<std::uint64_t> steps;
  double steps_fraction = 0.25;
  std::optional<double> learning_rate;
  double learning_rate_scale = 0.5;
  int batch_r = 0;  // 0 = protocol batch size
  int batch_f = 0;
};

struct ShortFtSpec {
  std::optional<int> epochs;
  double epochs_fraction = 0.2;
  std::optional<double> learning_rate;
  double learning_rate_scale = 0.5;
};

struct ScenarioConfig {
  DataConfig data;
  CorruptionConfig corruption;
  int hidden_dim = 16;
  TrainProtocol protocol;  // protocol.seed is ignored here; stage seeds derive
                           // from the scenario seeds below
  UnlearnSpec unlearn;
  ShortFtSpec short_ft;
  std::vector<int> ks{1, 3, 5};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
};

using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

ConfigMap parse_config_text(const std::string& text, const std::string& name);
ConfigMap parse_config_file(const std::string& path);
ScenarioConfig scenario_config_from_map(const ConfigMap& map);
ScenarioConfig load_scenario_config(const std::string& path);

// Stage seeds of one replicate; baseline and oracle share `train` so that an
// empty forget-set reproduces the baseline run exactly.
struct StageSeeds {
  std::uint64_t pool = 0;
  std::uint64_t split = 0;
  std::uint64_t targets = 0;
  std::uint64_t corrupt = 0;
  std::uint64_t train = 0;
  std::uint64_t unlearn_base = 0;  // mixed with K per cell
  std::uint64_t naive_base = 0;
};

StageSeeds make_stage_seeds(const ScenarioConfig& config, std::uint64_t replicate_seed);

// Pool + split + corruption targets for one replicate, exactly as the
// scenario runner builds them. Step-by-step CLI commands reuse this so their
// artifacts match the corresponding `run` cells.
struct PreparedData {
  SubjectPool pool;
  SplitManifest manifest;
  std::vector<std::string> corruption_targets;
};

PreparedData prepare_data(const ScenarioConfig& config, std::uint64_t replicate_seed);

// Materialized per-cell configs.
UnlearnConfig materialize_unlearn_config(const ScenarioConfig& config,
                                         const ComputeLedger& baseline_ledger,
                                         std::uint64_t seed, int k);
TrainProtocol materialize_short_ft(const ScenarioConfig& config, std::uint64_t seed, int k);
TrainProtocol materialize_protocol(const ScenarioConfig& config, std::uint64_t train_seed);

// ---------------------------------------------------------------------------
// Scenario report
// ---------------------------------------------------------------------------

struct ArmOutcome {
  bool ok = false;
  std::string error;  // set when !ok
  EvalReport eval;
  ComputeLedger ledger;
  double rel_compute = 0.0;
};

struct CellReport {
  std::uint64_t seed = 0;
  int k = 0;
  ForgetSet forget_set;
  std::string forget_set_hash;
  ArmOutcome unlearned;
  ArmOutcome oracle;
  ArmOutcome naive;
  OgrRecord ogr_unlearned;  // valid when unlearned & oracle arms ok
  OgrRecord ogr_naive;      // valid when naive & oracle arms ok
  bool forgetting_valid = false;
  double forgetting_strength = 0.0;
  double l_forg_first_quartile = 0.0;  // trace trend summary
  double l_forg_last_quartile = 0.0;
  int corrupted_overlap = -1;  // |forget_set ∩ corruption targets|; -1 without corruption
};

struct SeedReport {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // baseline/scoring failure aborts the seed block
  std::size_t train_subjects = 0;
  std::size_t eval_subjects = 0;
  std::size_t train_clips = 0;
  std::size_t eval_clips = 0;
  std::vector<std::string> corruption_targets;
  std::vector<SubjectScore> ranking;
  std::string ranking_digest;
  EvalReport baseline_eval;
  ComputeLedger baseline_ledger;
  std::vector<CellReport> cells;
};

struct KAggregate {
  int k = 0;
  int complete_cells = 0;  // cells with all three arms ok
  double baseline_mean = 0.0, baseline_std = 0.0;
  double unlearned_mean = 0.0, unlearned_std = 0.0;
  double oracle_mean = 0.0, oracle_std = 0.0;
  double naive_mean = 0.0, naive_std = 0.0;
  OgrRecord ogr_unlearned;  // from mean accuracies
  OgrRecord ogr_naive;
  double forgetting_mean = 0.0;
  double rel_compute_unlearned_mean = 0.0;
  double rel_compute_oracle_mean = 0.0;
  double rel_compute_naive_mean = 0.0;
  double overlap_mean = -1.0;
};

struct ScenarioReport {
  ScenarioConfig config;
  std::vector<SeedReport> seeds;
  std::vector<KAggregate> aggregates;
  std::vector<MarginalGain> marginals;  // present when >= 2 ks aggregate
  std::vector<std::string> events;      // ordered phase log
};

// Runs the full pipeline: per seed one baseline, one ranking, then per K the
// unlearned/oracle/naive arms over the same forget-set. A failing arm is
// recorded in its cell and never aborts siblings.
ScenarioReport run_scenario(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string report_to_json(const ScenarioReport& report);  // no wall_seconds inside
ScenarioReport report_from_json(const std::string& json_text);
ScenarioReport load_report(const std::string& path);

// Writes the deterministic file set under out_dir:
//   csv:  ranking_<seed>.csv, main_table_<seed>_<K>.csv, sensitivity.csv,
//         marginals.csv, tradeoff.csv
//   json: report.json
// manifest.json (config echo, content hashes, event order, timing block) is
// always written.
std::vector<std::string> emit_report(const ScenarioReport& report, const std::string& out_dir,
                                     const std::vector<std::string>& formats);

struct SweepSeries {
  struct AccuracyPoint {
    int k = 0;
    double baseline = 0.0, unlearned = 0.0, oracle = 0.0;
  };
  struct TradeoffPoint {
    int k = 0;
    double forgetting_strength = 0.0, unlearned_accuracy = 0.0;
  };
  // label is "seed_<s>" per replicate plus "mean" for the aggregate
  std::vector<std::pair<std::string, std::vector<AccuracyPoint>>> accuracy;
  std::vector<std::pair<std::string, std::vector<TradeoffPoint>>> tradeoff;
};

// Plot-ready series across K (requires >= 2 K values in the report).
SweepSeries sweep_to_series(const ScenarioReport& report);
std::vector<std::string> emit_series_csv(const SweepSeries& series, const std::string& out_dir);

}  // namespace sul
