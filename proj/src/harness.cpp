// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "sul/error.hpp"
#include "sul/harness.hpp"
#include "sul/rng.hpp"

namespace sul {

namespace {

// Stage tags for deriving per-replicate stream seeds.
enum : std::uint64_t {
  kStagePool = 1,
  kStageSplit = 2,
  kStageTargets = 3,
  kStageCorrupt = 4,
  kStageTrain = 5,
  kStageUnlearn = 6,
  kStageNaive = 7,
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::string> pick_targets(const ScenarioConfig& config,
                                      const SplitManifest& manifest,
                                      std::uint64_t target_seed) {
  const CorruptionConfig& corr = config.corruption;
  if (!corr.enabled) return {};
  if (!corr.target_ids.empty()) {
    for (const std::string& sid : corr.target_ids)
      if (!manifest.train_subjects.count(sid))
        raise(ErrorCode::Config, "corruption target " + sid + " is not a training subject");
    return corr.target_ids;
  }
  if (corr.num_targets > static_cast<int>(manifest.train_subjects.size()))
    raise(ErrorCode::Config, "corruption num_targets exceeds training subject count");
  std::vector<std::string> train_ids(manifest.train_subjects.begin(),
                                     manifest.train_subjects.end());
  Rng rng(target_seed);
  rng.shuffle(train_ids);
  train_ids.resize(static_cast<std::size_t>(corr.num_targets));
  std::sort(train_ids.begin(), train_ids.end());
  return train_ids;
}

}  // namespace

StageSeeds make_stage_seeds(const ScenarioConfig& config, std::uint64_t replicate_seed) {
  const std::uint64_t base = derive_seed(config.data.gen.seed, replicate_seed);
  StageSeeds seeds;
  seeds.pool = derive_seed(base, kStagePool);
  seeds.split = derive_seed(base, kStageSplit);
  seeds.targets = derive_seed(base, kStageTargets);
  seeds.corrupt = derive_seed(base, kStageCorrupt);
  seeds.train = derive_seed(base, kStageTrain);
  seeds.unlearn_base = derive_seed(base, kStageUnlearn);
  seeds.naive_base = derive_seed(base, kStageNaive);
  return seeds;
}

PreparedData prepare_data(const ScenarioConfig& config, std::uint64_t replicate_seed) {
  const StageSeeds seeds = make_stage_seeds(config, replicate_seed);
  SubjectPool pool = config.data.source == DataSource::Synthetic
                         ? generate_pool(config.data.gen.num_subjects,
                                         config.data.gen.clips_per_subject,
                                         config.data.gen.feature_dim,
                                         config.data.gen.num_classes,
                                         config.data.gen.class_separation, seeds.pool)
                         : load_pool_from_csv(config.data.csv_path, config.data.csv_classes);
  SplitManifest manifest = split_subject_disjoint(pool, config.data.eval_fraction, seeds.split);
  std::vector<std::string> targets = pick_targets(config, manifest, seeds.targets);
  if (!targets.empty()) {
    pool = corrupt_subjects(pool, {targets.begin(), targets.end()},
                            config.corruption.profile, seeds.corrupt);
  }
  return PreparedData{std::move(pool), std::move(manifest), std::move(targets)};
}

TrainProtocol materialize_protocol(const ScenarioConfig& config, std::uint64_t train_seed) {
  TrainProtocol protocol = config.protocol;
  protocol.seed = train_seed;
  return protocol;
}

UnlearnConfig materialize_unlearn_config(const ScenarioConfig& config,
                                         const ComputeLedger& baseline_ledger,
                                         std::uint64_t seed, int k) {
  UnlearnConfig ucfg;
  ucfg.lambda_cons = config.unlearn.lambda_cons;
  ucfg.lambda_forg = config.unlearn.lambda_forg;
  ucfg.lambda_reg = config.unlearn.lambda_reg;
  ucfg.steps = config.unlearn.steps
                   ? *config.unlearn.steps
                   : static_cast<std::uint64_t>(std::ceil(
                         config.unlearn.steps_fraction *
                         static_cast<double>(baseline_ledger.gradient_steps)));
  ucfg.learning_rate = config.unlearn.learning_rate
                           ? *config.unlearn.learning_rate
                           : config.protocol.learning_rate * config.unlearn.learning_rate_scale;
  ucfg.batch_r = config.unlearn.batch_r > 0 ? config.unlearn.batch_r : config.protocol.batch_size;
  ucfg.batch_f = config.unlearn.batch_f > 0 ? config.unlearn.batch_f : config.protocol.batch_size;
  ucfg.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
  return ucfg;
}

TrainProtocol materialize_short_ft(const ScenarioConfig& config, std::uint64_t seed, int k) {
  TrainProtocol protocol = config.protocol;
  if (config.short_ft.epochs) {
    protocol.epochs = *config.short_ft.epochs;
  } else {
    protocol.epochs = std::max(
        1, static_cast<int>(std::lround(config.short_ft.epochs_fraction *
                                        static_cast<double>(config.protocol.epochs))));
  }
  protocol.learning_rate = config.short_ft.learning_rate
                               ? *config.short_ft.learning_rate
                               : config.protocol.learning_rate * config.short_ft.learning_rate_scale;
  protocol.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
  return protocol;
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  ScenarioReport report;
  report.config = config;

  auto log = [&report](const std::string& event) { report.events.push_back(event); };

  std::optional<ErrorCode> first_failure_code;
  for (const std::uint64_t seed : config.seeds) {
    SeedReport sr;
    sr.seed = seed;
    const std::string seed_tag = "seed=" + std::to_string(seed);
    try {
      const StageSeeds stage_seeds = make_stage_seeds(config, seed);
      PreparedData data = prepare_data(config, seed);
      const SubjectPool& pool = data.pool;
      const SplitManifest& manifest = data.manifest;
      sr.corruption_targets = data.corruption_targets;
      sr.train_subjects = manifest.train_subjects.size();
      sr.eval_subjects = manifest.eval_subjects.size();
      log(seed_tag + " data_prepared subjects=" + std::to_string(pool.num_subjects()));

      for (const int k : config.ks)
        if (k >= static_cast<int>(manifest.train_subjects.size()))
          raise(ErrorCode::Config, "k=" + std::to_string(k) +
                                       " must be smaller than the training subject count " +
                                       std::to_string(manifest.train_subjects.size()));

      const auto eval_clips = collect_clips(pool, manifest.eval_subjects);
      sr.eval_clips = eval_clips.size();
      sr.train_clips = collect_clips(pool, manifest.train_subjects).size();

      const TrainProtocol protocol = materialize_protocol(config, stage_seeds.train);
      TrainResult baseline = train_baseline(pool, manifest, protocol, config.hidden_dim);
      sr.baseline_ledger = baseline.ledger;
      log(seed_tag + " baseline_trained steps=" + std::to_string(baseline.ledger.gradient_steps));

      sr.ranking = score_subjects(baseline.model, pool, manifest);
      sr.ranking_digest = ranking_hash(sr.ranking);
      log(seed_tag + " subjects_scored hash=" + sr.ranking_digest);

      sr.baseline_eval = evaluate(baseline.model, eval_clips, SplitTag::Eval);

      for (const int k : config.ks) {
        CellReport cell;
        cell.seed = seed;
        cell.k = k;
        const std::string cell_tag = seed_tag + " k=" + std::to_string(k);

        cell.forget_set = build_forget_set(sr.ranking, k);
        cell.forget_set_hash = forget_set_hash(cell.forget_set);
        log(cell_tag + " forget_set_recorded hash=" + cell.forget_set_hash);

        const TrainPartition part = partition(pool, manifest, cell.forget_set);

        // Unlearned arm.
        try {
          const UnlearnConfig ucfg =
              materialize_unlearn_config(config, baseline.ledger, stage_seeds.unlearn_base, k);
          log(cell_tag + " unlearn_arm_started");
          UnlearnResult unl = run_unlearning(baseline.model, part.retained, part.forgotten, ucfg);
          cell.unlearned.eval = evaluate(unl.model, eval_clips, SplitTag::Eval);
          cell.unlearned.ledger = unl.ledger;
          cell.unlearned.rel_compute = relative_compute(unl.ledger, baseline.ledger);
          cell.forgetting_strength =
              forgetting_strength(baseline.model, unl.model, part.forgotten);
          cell.forgetting_valid = true;
          if (!unl.trace.empty()) {
            const std::size_t n = unl.trace.size();
            const std::size_t q = std::max<std::size_t>(1, n / 4);
            double first = 0.0, last = 0.0;
            for (std::size_t i = 0; i < q; ++i) first += unl.trace[i].l_forg;
            for (std::size_t i = n - q; i < n; ++i) last += unl.trace[i].l_forg;
            cell.l_forg_first_quartile = first / static_cast<double>(q);
            cell.l_forg_last_quartile = last / static_cast<double>(q);
          }
          cell.unlearned.ok = true;
        } catch (const std::exception& e) {
          cell.unlearned.error = e.what();
        }

        // Oracle arm: same protocol and seed as the baseline, retained data only.
        try {
          log(cell_tag + " oracle_arm_started");
          TrainResult oracle =
              train_oracle(pool, manifest, cell.forget_set, protocol, config.hidden_dim);
          cell.oracle.eval = evaluate(oracle.model, eval_clips, SplitTag::Eval);
          cell.oracle.ledger = oracle.ledger;
          cell.oracle.rel_compute = relative_compute(oracle.ledger, baseline.ledger);
          cell.oracle.ok = true;
        } catch (const std::exception& e) {
          cell.oracle.error = e.what();
        }

        // Naive removal + short finetuning arm.
        try {
          const TrainProtocol short_ft =
              materialize_short_ft(config, stage_seeds.naive_base, k);
          log(cell_tag + " naive_arm_started");
          TrainResult naive =
              finetune_naive(baseline.model, pool, manifest, cell.forget_set, short_ft);
          cell.naive.eval = evaluate(naive.model, eval_clips, SplitTag::Eval);
          cell.naive.ledger = naive.ledger;
          cell.naive.rel_compute = relative_compute(naive.ledger, baseline.ledger);
          cell.naive.ok = true;
        } catch (const std::exception& e) {
          cell.naive.error = e.what();
        }

        if (cell.unlearned.ok && cell.oracle.ok)
          cell.ogr_unlearned = ogr(sr.baseline_eval.accuracy, cell.unlearned.eval.accuracy,
                                   cell.oracle.eval.accuracy);
        if (cell.naive.ok && cell.oracle.ok)
          cell.ogr_naive = ogr(sr.baseline_eval.accuracy, cell.naive.eval.accuracy,
                               cell.oracle.eval.accuracy);

        // Post-hoc audit: overlap with the injected corruption targets.
        if (!sr.corruption_targets.empty()) {
          int overlap = 0;
          for (const std::string& sid : cell.forget_set.subjects)
            if (std::find(sr.corruption_targets.begin(), sr.corruption_targets.end(), sid) !=
                sr.corruption_targets.end())
              ++overlap;
          cell.corrupted_overlap = overlap;
        }

        sr.cells.push_back(std::move(cell));
        log(cell_tag + " cell_done");
      }
      sr.ok = true;
    } catch (const Error& e) {
      sr.error = e.what();
      if (!first_failure_code) first_failure_code = e.code();
      log(seed_tag + " seed_failed: " + sr.error);
    } catch (const std::exception& e) {
      sr.error = e.what();
      if (!first_failure_code) first_failure_code = ErrorCode::Internal;
      log(seed_tag + " seed_failed: " + sr.error);
    }
    report.seeds.push_back(std::move(sr));
  }

  // A partially failed run still yields a report; a run where no seed
  // produced anything is rejected outright.
  if (std::none_of(report.seeds.begin(), report.seeds.end(),
                   [](const SeedReport& sr) { return sr.ok; })) {
    raise(first_failure_code.value_or(ErrorCode::Internal),
          "every seed failed; first error: " + report.seeds.front().error);
  }

  // Aggregates over complete cells (all three arms succeeded).
  for (const int k : config.ks) {
    KAggregate agg;
    agg.k = k;
    std::vector<double> b, u, o, n, fstr, rel_u, rel_o, rel_n, overlap;
    for (const SeedReport& sr : report.seeds) {
      if (!sr.ok) continue;
      for (const CellReport& cell : sr.cells) {
        if (cell.k != k) continue;
        if (!(cell.unlearned.ok && cell.oracle.ok && cell.naive.ok)) continue;
        b.push_back(sr.baseline_eval.accuracy);
        u.push_back(cell.unlearned.eval.accuracy);
        o.push_back(cell.oracle.eval.accuracy);
        n.push_back(cell.naive.eval.accuracy);
        if (cell.forgetting_valid) fstr.push_back(cell.forgetting_strength);
        rel_u.push_back(cell.unlearned.rel_compute);
        rel_o.push_back(cell.oracle.rel_compute);
        rel_n.push_back(cell.naive.rel_compute);
        if (cell.corrupted_overlap >= 0) overlap.push_back(cell.corrupted_overlap);
      }
    }
    agg.complete_cells = static_cast<int>(b.size());
    if (agg.complete_cells > 0) {
      agg.baseline_mean = mean_of(b);
      agg.baseline_std = sample_std(b);
      agg.unlearned_mean = mean_of(u);
      agg.unlearned_std = sample_std(u);
      agg.oracle_mean = mean_of(o);
      agg.oracle_std = sample_std(o);
      agg.naive_mean = mean_of(n);
      agg.naive_std = sample_std(n);
      agg.ogr_unlearned = ogr(agg.baseline_mean, agg.unlearned_mean, agg.oracle_mean);
      agg.ogr_naive = ogr(agg.baseline_mean, agg.naive_mean, agg.oracle_mean);
      agg.forgetting_mean = mean_of(fstr);
      agg.rel_compute_unlearned_mean = mean_of(rel_u);
      agg.rel_compute_oracle_mean = mean_of(rel_o);
      agg.rel_compute_naive_mean = mean_of(rel_n);
      agg.overlap_mean = overlap.empty() ? -1.0 : mean_of(overlap);
    }
    report.aggregates.push_back(agg);
  }

  if (report.aggregates.size() >= 2) {
    std::vector<std::pair<int, OgrRecord>> records;
    bool all_complete = true;
    for (const KAggregate& agg : report.aggregates) {
      if (agg.complete_cells == 0) all_complete = false;
      records.emplace_back(agg.k, agg.ogr_unlearned);
    }
    if (all_complete) report.marginals = marginal_gains(records);
  }
  return report;
}

}  // namespace sul
