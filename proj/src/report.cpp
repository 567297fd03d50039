// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sul/digest.hpp"
#include "sul/error.hpp"
#include "sul/harness.hpp"

namespace sul {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// Accuracies are emitted in percent with 2 decimals, OGR in percent with 1.
std::string pct(double fraction) { return fixed(100.0 * fraction, 2); }

std::string ogr_pct(const std::optional<double>& ogr) {
  return ogr ? fixed(100.0 * *ogr, 1) : std::string();
}

// --- JSON mappers ----------------------------------------------------------

json ledger_to_json(const ComputeLedger& ledger) {
  // wall_seconds intentionally left out; it lives in the manifest timing block.
  return json{{"gradient_steps", ledger.gradient_steps},
              {"clips_processed", ledger.clips_processed}};
}

ComputeLedger ledger_from_json(const json& j) {
  ComputeLedger ledger;
  ledger.gradient_steps = j.at("gradient_steps").get<std::uint64_t>();
  ledger.clips_processed = j.at("clips_processed").get<std::uint64_t>();
  return ledger;
}

json eval_to_json(const EvalReport& report) {
  return json{{"accuracy", report.accuracy},
              {"confusion", report.confusion},
              {"num_classes", report.num_classes},
              {"total", report.total},
              {"split", split_tag_name(report.split_tag)}};
}

EvalReport eval_from_json(const json& j) {
  EvalReport report;
  report.accuracy = j.at("accuracy").get<double>();
  report.confusion = j.at("confusion").get<std::vector<std::uint64_t>>();
  report.num_classes = j.at("num_classes").get<int>();
  report.total = j.at("total").get<std::uint64_t>();
  const std::string split = j.at("split").get<std::string>();
  report.split_tag = split == "train_retained"
                         ? SplitTag::TrainRetained
                         : (split == "train_forgotten" ? SplitTag::TrainForgotten : SplitTag::Eval);
  return report;
}

json ogr_to_json(const OgrRecord& rec) {
  json j{{"m_b", rec.m_b},
         {"m_u", rec.m_u},
         {"m_o", rec.m_o},
         {"delta_oracle", rec.delta_oracle},
         {"delta_res", rec.delta_res}};
  j["ogr"] = rec.ogr ? json(*rec.ogr) : json(nullptr);
  return j;
}

OgrRecord ogr_from_json(const json& j) {
  OgrRecord rec;
  rec.m_b = j.at("m_b").get<double>();
  rec.m_u = j.at("m_u").get<double>();
  rec.m_o = j.at("m_o").get<double>();
  rec.delta_oracle = j.at("delta_oracle").get<double>();
  rec.delta_res = j.at("delta_res").get<double>();
  if (!j.at("ogr").is_null()) rec.ogr = j.at("ogr").get<double>();
  return rec;
}

json arm_to_json(const ArmOutcome& arm) {
  json j;
  j["ok"] = arm.ok;
  j["error"] = arm.error;
  j["eval"] = arm.ok ? eval_to_json(arm.eval) : json(nullptr);
  j["ledger"] = ledger_to_json(arm.ledger);
  j["rel_compute"] = arm.rel_compute;
  return j;
}

ArmOutcome arm_from_json(const json& j) {
  ArmOutcome arm;
  arm.ok = j.at("ok").get<bool>();
  arm.error = j.at("error").get<std::string>();
  if (!j.at("eval").is_null()) arm.eval = eval_from_json(j.at("eval"));
  arm.ledger = ledger_from_json(j.at("ledger"));
  arm.rel_compute = j.at("rel_compute").get<double>();
  return arm;
}

json config_to_json(const ScenarioConfig& cfg) {
  json data;
  data["source"] = cfg.data.source == DataSource::Synthetic ? "synthetic" : "csv";
  data["num_subjects"] = cfg.data.gen.num_subjects;
  data["clips_min"] = cfg.data.gen.clips_per_subject.min;
  data["clips_max"] = cfg.data.gen.clips_per_subject.max;
  data["feature_dim"] = cfg.data.gen.feature_dim;
  data["num_classes"] = cfg.data.gen.num_classes;
  data["class_separation"] = cfg.data.gen.class_separation;
  data["seed"] = cfg.data.gen.seed;
  data["csv_path"] = cfg.data.csv_path;
  data["csv_classes"] = cfg.data.csv_classes;
  data["eval_fraction"] = cfg.data.eval_fraction;

  json corruption;
  corruption["enabled"] = cfg.corruption.enabled;
  corruption["num_targets"] = cfg.corruption.num_targets;
  corruption["target_ids"] = cfg.corruption.target_ids;
  corruption["flip_rate"] = cfg.corruption.profile.label_flip_rate;
  corruption["flip_mode"] =
      cfg.corruption.profile.flip_mode == FlipMode::UniformRandomOtherClass ? "uniform" : "fixed";
  corruption["fixed_target_class"] = cfg.corruption.profile.fixed_target_class;
  corruption["feature_shift"] = cfg.corruption.profile.feature_shift;

  json protocol;
  protocol["epochs"] = cfg.protocol.epochs;
  protocol["batch_size"] = cfg.protocol.batch_size;
  protocol["learning_rate"] = cfg.protocol.learning_rate;
  protocol["selection"] =
      cfg.protocol.selection == Selection::FinalEpoch ? "final-epoch" : "best-train-loss";

  json unlearn;
  unlearn["lambda_cons"] = cfg.unlearn.lambda_cons;
  unlearn["lambda_forg"] = cfg.unlearn.lambda_forg;
  unlearn["lambda_reg"] = cfg.unlearn.lambda_reg;
  unlearn["steps"] = cfg.unlearn.steps ? json(*cfg.unlearn.steps) : json(nullptr);
  unlearn["steps_fraction"] = cfg.unlearn.steps_fraction;
  unlearn["learning_rate"] =
      cfg.unlearn.learning_rate ? json(*cfg.unlearn.learning_rate) : json(nullptr);
  unlearn["learning_rate_scale"] = cfg.unlearn.learning_rate_scale;
  unlearn["batch_r"] = cfg.unlearn.batch_r;
  unlearn["batch_f"] = cfg.unlearn.batch_f;

  json short_ft;
  short_ft["epochs"] = cfg.short_ft.epochs ? json(*cfg.short_ft.epochs) : json(nullptr);
  short_ft["epochs_fraction"] = cfg.short_ft.epochs_fraction;
  short_ft["learning_rate"] =
      cfg.short_ft.learning_rate ? json(*cfg.short_ft.learning_rate) : json(nullptr);
  short_ft["learning_rate_scale"] = cfg.short_ft.learning_rate_scale;

  json j;
  j["data"] = data;
  j["corruption"] = corruption;
  j["hidden_dim"] = cfg.hidden_dim;
  j["protocol"] = protocol;
  j["unlearn"] = unlearn;
  j["short_ft"] = short_ft;
  j["ks"] = cfg.ks;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["formats"] = cfg.formats;
  return j;
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig cfg;
  const json& data = j.at("data");
  cfg.data.source =
      data.at("source").get<std::string>() == "csv" ? DataSource::Csv : DataSource::Synthetic;
  cfg.data.gen.num_subjects = data.at("num_subjects").get<int>();
  cfg.data.gen.clips_per_subject.min = data.at("clips_min").get<int>();
  cfg.data.gen.clips_per_subject.max = data.at("clips_max").get<int>();
  cfg.data.gen.feature_dim = data.at("feature_dim").get<int>();
  cfg.data.gen.num_classes = data.at("num_classes").get<int>();
  cfg.data.gen.class_separation = data.at("class_separation").get<double>();
  cfg.data.gen.seed = data.at("seed").get<std::uint64_t>();
  cfg.data.csv_path = data.at("csv_path").get<std::string>();
  cfg.data.csv_classes = data.at("csv_classes").get<int>();
  cfg.data.eval_fraction = data.at("eval_fraction").get<double>();

  const json& corr = j.at("corruption");
  cfg.corruption.enabled = corr.at("enabled").get<bool>();
  cfg.corruption.num_targets = corr.at("num_targets").get<int>();
  cfg.corruption.target_ids = corr.at("target_ids").get<std::vector<std::string>>();
  cfg.corruption.profile.label_flip_rate = corr.at("flip_rate").get<double>();
  cfg.corruption.profile.flip_mode = corr.at("flip_mode").get<std::string>() == "fixed"
                                         ? FlipMode::FixedTargetClass
                                         : FlipMode::UniformRandomOtherClass;
  cfg.corruption.profile.fixed_target_class = corr.at("fixed_target_class").get<int>();
  cfg.corruption.profile.feature_shift = corr.at("feature_shift").get<std::vector<double>>();

  cfg.hidden_dim = j.at("hidden_dim").get<int>();

  const json& protocol = j.at("protocol");
  cfg.protocol.epochs = protocol.at("epochs").get<int>();
  cfg.protocol.batch_size = protocol.at("batch_size").get<int>();
  cfg.protocol.learning_rate = protocol.at("learning_rate").get<double>();
  cfg.protocol.selection = protocol.at("selection").get<std::string>() == "best-train-loss"
                               ? Selection::BestTrainLoss
                               : Selection::FinalEpoch;

  const json& unlearn = j.at("unlearn");
  cfg.unlearn.lambda_cons = unlearn.at("lambda_cons").get<double>();
  cfg.unlearn.lambda_forg = unlearn.at("lambda_forg").get<double>();
  cfg.unlearn.lambda_reg = unlearn.at("lambda_reg").get<double>();
  if (!unlearn.at("steps").is_null()) cfg.unlearn.steps = unlearn.at("steps").get<std::uint64_t>();
  cfg.unlearn.steps_fraction = unlearn.at("steps_fraction").get<double>();
  if (!unlearn.at("learning_rate").is_null())
    cfg.unlearn.learning_rate = unlearn.at("learning_rate").get<double>();
  cfg.unlearn.learning_rate_scale = unlearn.at("learning_rate_scale").get<double>();
  cfg.unlearn.batch_r = unlearn.at("batch_r").get<int>();
  cfg.unlearn.batch_f = unlearn.at("batch_f").get<int>();

  const json& short_ft = j.at("short_ft");
  if (!short_ft.at("epochs").is_null()) cfg.short_ft.epochs = short_ft.at("epochs").get<int>();
  cfg.short_ft.epochs_fraction = short_ft.at("epochs_fraction").get<double>();
  if (!short_ft.at("learning_rate").is_null())
    cfg.short_ft.learning_rate = short_ft.at("learning_rate").get<double>();
  cfg.short_ft.learning_rate_scale = short_ft.at("learning_rate_scale").get<double>();

  cfg.ks = j.at("ks").get<std::vector<int>>();
  cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.formats = j.at("formats").get<std::vector<std::string>>();
  return cfg;
}

json cell_to_json(const CellReport& cell) {
  json j;
  j["seed"] = cell.seed;
  j["k"] = cell.k;
  j["forget_set"] = json{{"k", cell.forget_set.k},
                         {"subjects", cell.forget_set.subjects},
                         {"source_ranking_hash", cell.forget_set.source_ranking_hash}};
  j["forget_set_hash"] = cell.forget_set_hash;
  j["unlearned"] = arm_to_json(cell.unlearned);
  j["oracle"] = arm_to_json(cell.oracle);
  j["naive"] = arm_to_json(cell.naive);
  j["ogr_unlearned"] = cell.unlearned.ok && cell.oracle.ok ? ogr_to_json(cell.ogr_unlearned) : json(nullptr);
  j["ogr_naive"] = cell.naive.ok && cell.oracle.ok ? ogr_to_json(cell.ogr_naive) : json(nullptr);
  j["forgetting_valid"] = cell.forgetting_valid;
  j["forgetting_strength"] = cell.forgetting_strength;
  j["l_forg_first_quartile"] = cell.l_forg_first_quartile;
  j["l_forg_last_quartile"] = cell.l_forg_last_quartile;
  j["corrupted_overlap"] = cell.corrupted_overlap;
  return j;
}

CellReport cell_from_json(const json& j) {
  CellReport cell;
  cell.seed = j.at("seed").get<std::uint64_t>();
  cell.k = j.at("k").get<int>();
  cell.forget_set.k = j.at("forget_set").at("k").get<int>();
  cell.forget_set.subjects = j.at("forget_set").at("subjects").get<std::vector<std::string>>();
  cell.forget_set.source_ranking_hash =
      j.at("forget_set").at("source_ranking_hash").get<std::string>();
  cell.forget_set_hash = j.at("forget_set_hash").get<std::string>();
  cell.unlearned = arm_from_json(j.at("unlearned"));
  cell.oracle = arm_from_json(j.at("oracle"));
  cell.naive = arm_from_json(j.at("naive"));
  if (!j.at("ogr_unlearned").is_null()) cell.ogr_unlearned = ogr_from_json(j.at("ogr_unlearned"));
  if (!j.at("ogr_naive").is_null()) cell.ogr_naive = ogr_from_json(j.at("ogr_naive"));
  cell.forgetting_valid = j.at("forgetting_valid").get<bool>();
  cell.forgetting_strength = j.at("forgetting_strength").get<double>();
  cell.l_forg_first_quartile = j.at("l_forg_first_quartile").get<double>();
  cell.l_forg_last_quartile = j.at("l_forg_last_quartile").get<double>();
  cell.corrupted_overlap = j.at("corrupted_overlap").get<int>();
  return cell;
}

json seed_to_json(const SeedReport& sr) {
  json j;
  j["seed"] = sr.seed;
  j["ok"] = sr.ok;
  j["error"] = sr.error;
  j["train_subjects"] = sr.train_subjects;
  j["eval_subjects"] = sr.eval_subjects;
  j["train_clips"] = sr.train_clips;
  j["eval_clips"] = sr.eval_clips;
  j["corruption_targets"] = sr.corruption_targets;
  json ranking = json::array();
  for (const SubjectScore& s : sr.ranking)
    ranking.push_back(json{{"subject_id", s.subject_id},
                           {"score", s.score},
                           {"clip_count", s.clip_count}});
  j["ranking"] = ranking;
  j["ranking_digest"] = sr.ranking_digest;
  j["baseline_eval"] = sr.ok ? eval_to_json(sr.baseline_eval) : json(nullptr);
  j["baseline_ledger"] = ledger_to_json(sr.baseline_ledger);
  json cells = json::array();
  for (const CellReport& cell : sr.cells) cells.push_back(cell_to_json(cell));
  j["cells"] = cells;
  return j;
}

SeedReport seed_from_json(const json& j) {
  SeedReport sr;
  sr.seed = j.at("seed").get<std::uint64_t>();
  sr.ok = j.at("ok").get<bool>();
  sr.error = j.at("error").get<std::string>();
  sr.train_subjects = j.at("train_subjects").get<std::size_t>();
  sr.eval_subjects = j.at("eval_subjects").get<std::size_t>();
  sr.train_clips = j.at("train_clips").get<std::size_t>();
  sr.eval_clips = j.at("eval_clips").get<std::size_t>();
  sr.corruption_targets = j.at("corruption_targets").get<std::vector<std::string>>();
  for (const json& e : j.at("ranking"))
    sr.ranking.push_back(SubjectScore{e.at("subject_id").get<std::string>(),
                                      e.at("score").get<double>(),
                                      e.at("clip_count").get<int>()});
  sr.ranking_digest = j.at("ranking_digest").get<std::string>();
  if (!j.at("baseline_eval").is_null()) sr.baseline_eval = eval_from_json(j.at("baseline_eval"));
  sr.baseline_ledger = ledger_from_json(j.at("baseline_ledger"));
  for (const json& c : j.at("cells")) sr.cells.push_back(cell_from_json(c));
  return sr;
}

json aggregate_to_json(const KAggregate& agg) {
  json j;
  j["k"] = agg.k;
  j["complete_cells"] = agg.complete_cells;
  j["baseline_mean"] = agg.baseline_mean;
  j["baseline_std"] = agg.baseline_std;
  j["unlearned_mean"] = agg.unlearned_mean;
  j["unlearned_std"] = agg.unlearned_std;
  j["oracle_mean"] = agg.oracle_mean;
  j["oracle_std"] = agg.oracle_std;
  j["naive_mean"] = agg.naive_mean;
  j["naive_std"] = agg.naive_std;
  j["ogr_unlearned"] = ogr_to_json(agg.ogr_unlearned);
  j["ogr_naive"] = ogr_to_json(agg.ogr_naive);
  j["forgetting_mean"] = agg.forgetting_mean;
  j["rel_compute"] = json{{"unlearned", agg.rel_compute_unlearned_mean},
                          {"oracle", agg.rel_compute_oracle_mean},
                          {"naive", agg.rel_compute_naive_mean}};
  j["overlap_mean"] = agg.overlap_mean;
  return j;
}

KAggregate aggregate_from_json(const json& j) {
  KAggregate agg;
  agg.k = j.at("k").get<int>();
  agg.complete_cells = j.at("complete_cells").get<int>();
  agg.baseline_mean = j.at("baseline_mean").get<double>();
  agg.baseline_std = j.at("baseline_std").get<double>();
  agg.unlearned_mean = j.at("unlearned_mean").get<double>();
  agg.unlearned_std = j.at("unlearned_std").get<double>();
  agg.oracle_mean = j.at("oracle_mean").get<double>();
  agg.oracle_std = j.at("oracle_std").get<double>();
  agg.naive_mean = j.at("naive_mean").get<double>();
  agg.naive_std = j.at("naive_std").get<double>();
  agg.ogr_unlearned = ogr_from_json(j.at("ogr_unlearned"));
  agg.ogr_naive = ogr_from_json(j.at("ogr_naive"));
  agg.forgetting_mean = j.at("forgetting_mean").get<double>();
  agg.rel_compute_unlearned_mean = j.at("rel_compute").at("unlearned").get<double>();
  agg.rel_compute_oracle_mean = j.at("rel_compute").at("oracle").get<double>();
  agg.rel_compute_naive_mean = j.at("rel_compute").at("naive").get<double>();
  agg.overlap_mean = j.at("overlap_mean").get<double>();
  return agg;
}

json marginal_to_json(const MarginalGain& g) {
  json j;
  j["k"] = g.k;
  j["delta_oracle"] = g.delta_oracle;
  j["delta_unl"] = g.delta_unl;
  j["marginal_oracle"] = g.marginal_oracle ? json(*g.marginal_oracle) : json(nullptr);
  j["marginal_unl"] = g.marginal_unl ? json(*g.marginal_unl) : json(nullptr);
  return j;
}

MarginalGain marginal_from_json(const json& j) {
  MarginalGain g;
  g.k = j.at("k").get<int>();
  g.delta_oracle = j.at("delta_oracle").get<double>();
  g.delta_unl = j.at("delta_unl").get<double>();
  if (!j.at("marginal_oracle").is_null()) g.marginal_oracle = j.at("marginal_oracle").get<double>();
  if (!j.at("marginal_unl").is_null()) g.marginal_unl = j.at("marginal_unl").get<double>();
  return g;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << content;
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

std::string file_digest(const std::string& content) {
  Digest d;
  d.add_bytes(content.data(), content.size());
  return d.hex();
}

// --- CSV table builders ----------------------------------------------------

std::string main_table_csv(const SeedReport& sr, const CellReport& cell) {
  std::string out = "method,accuracy,ogr,rel_compute\n";
  out += "baseline," + pct(sr.baseline_eval.accuracy) + ",," + fixed(1.0, 4) + "\n";
  out += "naive,";
  out += cell.naive.ok ? pct(cell.naive.eval.accuracy) : std::string();
  out += ",";
  out += cell.naive.ok && cell.oracle.ok ? ogr_pct(cell.ogr_naive.ogr) : std::string();
  out += ",";
  out += cell.naive.ok ? fixed(cell.naive.rel_compute, 4) : std::string();
  out += "\n";
  out += "unlearned,";
  out += cell.unlearned.ok ? pct(cell.unlearned.eval.accuracy) : std::string();
  out += ",";
  out += cell.unlearned.ok && cell.oracle.ok ? ogr_pct(cell.ogr_unlearned.ogr) : std::string();
  out += ",";
  out += cell.unlearned.ok ? fixed(cell.unlearned.rel_compute, 4) : std::string();
  out += "\n";
  out += "oracle,";
  out += cell.oracle.ok ? pct(cell.oracle.eval.accuracy) : std::string();
  out += ",";
  // The oracle recovers its own gap in full whenever OGR is defined at all.
  const bool ogr_defined = cell.oracle.ok &&
                           cell.oracle.eval.accuracy > sr.baseline_eval.accuracy;
  out += ogr_defined ? fixed(100.0, 1) : std::string();
  out += ",";
  out += cell.oracle.ok ? fixed(cell.oracle.rel_compute, 4) : std::string();
  out += "\n";
  return out;
}

std::string sensitivity_csv(const ScenarioReport& report) {
  // Means and sample stds across seeds; the spread columns are a multi-seed
  // extension of the single-number table shape.
  std::string out =
      "k,baseline_mean,baseline_std,unlearned_mean,unlearned_std,oracle_mean,oracle_std,ogr\n";
  for (const KAggregate& agg : report.aggregates) {
    if (agg.complete_cells == 0) continue;
    out += std::to_string(agg.k) + "," + pct(agg.baseline_mean) + "," + pct(agg.baseline_std) +
           "," + pct(agg.unlearned_mean) + "," + pct(agg.unlearned_std) + "," +
           pct(agg.oracle_mean) + "," + pct(agg.oracle_std) + "," +
           ogr_pct(agg.ogr_unlearned.ogr) + "\n";
  }
  return out;
}

std::string marginals_csv(const ScenarioReport& report) {
  std::string out = "k,delta_oracle,delta_oracle_marginal,delta_unl,delta_unl_marginal,ogr\n";
  for (const MarginalGain& g : report.marginals) {
    std::optional<double> ogr_value;
    for (const KAggregate& agg : report.aggregates)
      if (agg.k == g.k) ogr_value = agg.ogr_unlearned.ogr;
    out += std::to_string(g.k) + "," + fixed(100.0 * g.delta_oracle, 2) + ",";
    out += g.marginal_oracle ? fixed(100.0 * *g.marginal_oracle, 2) : std::string();
    out += "," + fixed(100.0 * g.delta_unl, 2) + ",";
    out += g.marginal_unl ? fixed(100.0 * *g.marginal_unl, 2) : std::string();
    out += "," + ogr_pct(ogr_value) + "\n";
  }
  return out;
}

std::string tradeoff_csv(const ScenarioReport& report) {
  std::string out = "k,forgetting_strength,unlearned_accuracy\n";
  for (const KAggregate& agg : report.aggregates) {
    if (agg.complete_cells == 0) continue;
    out += std::to_string(agg.k) + "," + fixed(agg.forgetting_mean, 6) + "," +
           pct(agg.unlearned_mean) + "\n";
  }
  return out;
}

std::string ranking_csv_text(const std::vector<SubjectScore>& ranking) {
  std::string out = "rank,subject_id,score,clip_count\n";
  int rank = 1;
  for (const SubjectScore& s : ranking) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", s.score);
    out += std::to_string(rank++) + "," + s.subject_id + "," + buf + "," +
           std::to_string(s.clip_count) + "\n";
  }
  return out;
}

}  // namespace

std::string report_to_json(const ScenarioReport& report) {
  json j;
  j["config"] = config_to_json(report.config);
  json seeds = json::array();
  for (const SeedReport& sr : report.seeds) seeds.push_back(seed_to_json(sr));
  j["seeds"] = seeds;
  json aggregates = json::array();
  for (const KAggregate& agg : report.aggregates) aggregates.push_back(aggregate_to_json(agg));
  j["aggregates"] = aggregates;
  json marginals = json::array();
  for (const MarginalGain& g : report.marginals) marginals.push_back(marginal_to_json(g));
  j["marginals"] = marginals;
  j["events"] = report.events;
  return j.dump(2) + "\n";
}

ScenarioReport report_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::Ingest, std::string("report parse error: ") + e.what());
  }
  try {
    ScenarioReport report;
    report.config = config_from_json(j.at("config"));
    for (const json& s : j.at("seeds")) report.seeds.push_back(seed_from_json(s));
    for (const json& a : j.at("aggregates")) report.aggregates.push_back(aggregate_from_json(a));
    for (const json& m : j.at("marginals")) report.marginals.push_back(marginal_from_json(m));
    report.events = j.at("events").get<std::vector<std::string>>();
    return report;
  } catch (const json::exception& e) {
    raise(ErrorCode::Ingest, std::string("report field error: ") + e.what());
  }
}

ScenarioReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(ErrorCode::Io, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return report_from_json(text);
}

std::vector<std::string> emit_report(const ScenarioReport& report, const std::string& out_dir,
                                     const std::vector<std::string>& formats) {
  bool want_csv = false, want_json = false;
  for (const std::string& f : formats) {
    if (f == "csv") want_csv = true;
    else if (f == "json") want_json = true;
    else raise(ErrorCode::Param, "emit_report: unknown format '" + f + "'");
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    raise(ErrorCode::Io, "cannot create output dir " + out_dir + ": " + ec.message());
  // Probe writability up front so nothing is partially written on failure.
  {
    const std::string probe = (fs::path(out_dir) / ".write_probe").string();
    std::ofstream test(probe);
    if (!test)
      raise(ErrorCode::Io, "output dir " + out_dir + " is not writable");
    test.close();
    fs::remove(probe, ec);
  }

  std::vector<std::string> written;
  std::map<std::string, std::string> hashes;
  auto emit = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(out_dir) / name).string();
    write_text_file(path, content);
    written.push_back(path);
    hashes[name] = file_digest(content);
  };

  if (want_csv) {
    for (const SeedReport& sr : report.seeds) {
      if (!sr.ok) continue;
      emit("ranking_" + std::to_string(sr.seed) + ".csv", ranking_csv_text(sr.ranking));
      for (const CellReport& cell : sr.cells)
        emit("main_table_" + std::to_string(sr.seed) + "_" + std::to_string(cell.k) + ".csv",
             main_table_csv(sr, cell));
    }
    emit("sensitivity.csv", sensitivity_csv(report));
    emit("marginals.csv", marginals_csv(report));
    emit("tradeoff.csv", tradeoff_csv(report));
  }
  if (want_json) {
    emit("report.json", report_to_json(report));
  }

  // Manifest: config echo, per-file content hashes, the ordered event log and
  // the informational timing block (the one place wall-clock data appears).
  json manifest;
  manifest["config"] = config_to_json(report.config);
  json hash_obj;
  for (const auto& [name, digest] : hashes) hash_obj[name] = digest;
  manifest["content_hashes"] = hash_obj;
  manifest["events"] = report.events;
  json timing;
  for (const SeedReport& sr : report.seeds) {
    json seed_timing;
    seed_timing["baseline_wall_seconds"] = sr.baseline_ledger.wall_seconds;
    json cells;
    for (const CellReport& cell : sr.cells) {
      cells["k_" + std::to_string(cell.k)] =
          json{{"unlearned", cell.unlearned.ledger.wall_seconds},
               {"oracle", cell.oracle.ledger.wall_seconds},
               {"naive", cell.naive.ledger.wall_seconds}};
    }
    seed_timing["cells"] = cells;
    timing["seed_" + std::to_string(sr.seed)] = seed_timing;
  }
  manifest["timing"] = timing;
  {
    const std::string path = (fs::path(out_dir) / "manifest.json").string();
    write_text_file(path, manifest.dump(2) + "\n");
    written.push_back(path);
  }
  return written;
}

SweepSeries sweep_to_series(const ScenarioReport& report) {
  std::vector<int> ks;
  for (const KAggregate& agg : report.aggregates) ks.push_back(agg.k);
  if (ks.size() < 2)
    raise(ErrorCode::Param, "sweep_to_series: need >= 2 forget-set sizes");

  SweepSeries series;
  // Aggregate = mean of the per-seed series, so build those first.
  std::map<int, std::vector<SweepSeries::AccuracyPoint>> acc_by_k;
  std::map<int, std::vector<SweepSeries::TradeoffPoint>> trade_by_k;

  for (const SeedReport& sr : report.seeds) {
    if (!sr.ok) continue;
    std::vector<SweepSeries::AccuracyPoint> acc;
    std::vector<SweepSeries::TradeoffPoint> trade;
    for (const CellReport& cell : sr.cells) {
      if (cell.unlearned.ok && cell.oracle.ok) {
        SweepSeries::AccuracyPoint p{cell.k, sr.baseline_eval.accuracy,
                                     cell.unlearned.eval.accuracy, cell.oracle.eval.accuracy};
        acc.push_back(p);
        acc_by_k[cell.k].push_back(p);
      }
      if (cell.unlearned.ok && cell.forgetting_valid) {
        SweepSeries::TradeoffPoint p{cell.k, cell.forgetting_strength,
                                     cell.unlearned.eval.accuracy};
        trade.push_back(p);
        trade_by_k[cell.k].push_back(p);
      }
    }
    const std::string label = "seed_" + std::to_string(sr.seed);
    series.accuracy.emplace_back(label, std::move(acc));
    series.tradeoff.emplace_back(label, std::move(trade));
  }

  std::vector<SweepSeries::AccuracyPoint> acc_mean;
  for (const auto& [k, points] : acc_by_k) {
    SweepSeries::AccuracyPoint m{k, 0.0, 0.0, 0.0};
    for (const auto& p : points) {
      m.baseline += p.baseline;
      m.unlearned += p.unlearned;
      m.oracle += p.oracle;
    }
    const double n = static_cast<double>(points.size());
    m.baseline /= n;
    m.unlearned /= n;
    m.oracle /= n;
    acc_mean.push_back(m);
  }
  std::vector<SweepSeries::TradeoffPoint> trade_mean;
  for (const auto& [k, points] : trade_by_k) {
    SweepSeries::TradeoffPoint m{k, 0.0, 0.0};
    for (const auto& p : points) {
      m.forgetting_strength += p.forgetting_strength;
      m.unlearned_accuracy += p.unlearned_accuracy;
    }
    const double n = static_cast<double>(points.size());
    m.forgetting_strength /= n;
    m.unlearned_accuracy /= n;
    trade_mean.push_back(m);
  }
  series.accuracy.emplace_back("mean", std::move(acc_mean));
  series.tradeoff.emplace_back("mean", std::move(trade_mean));
  return series;
}

std::vector<std::string> emit_series_csv(const SweepSeries& series, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    raise(ErrorCode::Io, "cannot create output dir " + out_dir + ": " + ec.message());

  std::string acc = "series,k,baseline,unlearned,oracle\n";
  for (const auto& [label, points] : series.accuracy)
    for (const auto& p : points)
      acc += label + "," + std::to_string(p.k) + "," + pct(p.baseline) + "," + pct(p.unlearned) +
             "," + pct(p.oracle) + "\n";

  std::string trade = "series,k,forgetting_strength,unlearned_accuracy\n";
  for (const auto& [label, points] : series.tradeoff)
    for (const auto& p : points)
      trade += label + "," + std::to_string(p.k) + "," + fixed(p.forgetting_strength, 6) + "," +
               pct(p.unlearned_accuracy) + "\n";

  std::vector<std::string> written;
  const std::string acc_path = (fs::path(out_dir) / "series_accuracy.csv").string();
  write_text_file(acc_path, acc);
  written.push_back(acc_path);
  const std::string trade_path = (fs::path(out_dir) / "series_tradeoff.csv").string();
  write_text_file(trade_path, trade);
  written.push_back(trade_path);
  return written;
}

}  // namespace sul
