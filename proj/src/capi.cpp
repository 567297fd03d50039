// SPDX-License-Identifier: Apache-2.0
#include "sul.h"

#include <charconv>
#include <cstring>
#include <set>
#include <string>

#include "sul/checkpoint.hpp"
#include "sul/error.hpp"
#include "sul/harness.hpp"

namespace {

thread_local std::string tl_last_error;

sul_status map_code(sul::ErrorCode code) {
  switch (code) {
    case sul::ErrorCode::Param: return SUL_ERR_PARAM;
    case sul::ErrorCode::Data: return SUL_ERR_DATA;
    case sul::ErrorCode::Io: return SUL_ERR_IO;
    case sul::ErrorCode::Arch: return SUL_ERR_ARCH;
    case sul::ErrorCode::Hygiene: return SUL_ERR_HYGIENE;
    case sul::ErrorCode::Freeze: return SUL_ERR_FREEZE;
    case sul::ErrorCode::Partition: return SUL_ERR_PARTITION;
    case sul::ErrorCode::Lookup: return SUL_ERR_LOOKUP;
    case sul::ErrorCode::Ingest: return SUL_ERR_INGEST;
    case sul::ErrorCode::Config: return SUL_ERR_CONFIG;
    case sul::ErrorCode::Internal: return SUL_ERR_INTERNAL;
  }
  return SUL_ERR_INTERNAL;
}

template <typename Fn>
sul_status wrap(Fn&& fn) {
  try {
    fn();
    tl_last_error.clear();
    return SUL_OK;
  } catch (const sul::Error& e) {
    tl_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    tl_last_error = e.what();
    return SUL_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) sul::raise(sul::ErrorCode::Param, what);
}

sul::TrainProtocol to_protocol(const sul_protocol& p) {
  sul::TrainProtocol out;
  out.epochs = p.epochs;
  out.batch_size = p.batch_size;
  out.learning_rate = p.learning_rate;
  out.seed = p.seed;
  out.selection = p.selection == 1 ? sul::Selection::BestTrainLoss : sul::Selection::FinalEpoch;
  return out;
}

sul_protocol from_protocol(const sul::TrainProtocol& p) {
  sul_protocol out;
  out.epochs = p.epochs;
  out.batch_size = p.batch_size;
  out.learning_rate = p.learning_rate;
  out.seed = p.seed;
  out.selection = p.selection == sul::Selection::BestTrainLoss ? 1 : 0;
  return out;
}

void fill_ledger(sul_ledger* out, const sul::ComputeLedger& ledger) {
  if (!out) return;
  out->gradient_steps = ledger.gradient_steps;
  out->clips_processed = ledger.clips_processed;
  out->wall_seconds = ledger.wall_seconds;
}

}  // namespace

struct sul_pool {
  sul::SubjectPool value;
};
struct sul_split {
  sul::SplitManifest value;
};
struct sul_model {
  sul::ModelState state;
  sul::Provenance provenance;
};
struct sul_ranking {
  std::vector<sul::SubjectScore> value;
};
struct sul_forget_set {
  sul::ForgetSet value;
  std::string hash;
};
struct sul_config {
  sul::ScenarioConfig value;
};
struct sul_report {
  sul::ScenarioReport value;
};

extern "C" {

const char* sul_version(void) { return "0.1.0"; }

const char* sul_last_error(void) { return tl_last_error.c_str(); }

/* ---- pool ------------------------------------------------------------ */

sul_status sul_pool_generate(int32_t num_subjects, int32_t clips_min, int32_t clips_max,
                             int32_t feature_dim, int32_t num_classes, double class_separation,
                             uint64_t seed, sul_pool** out) {
  return wrap([&] {
    require(out != nullptr, "out is null");
    *out = new sul_pool{sul::generate_pool(num_subjects, {clips_min, clips_max}, feature_dim,
                                           num_classes, class_separation, seed)};
  });
}

sul_status sul_pool_load_csv(const char* path, int32_t expected_classes, sul_pool** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    *out = new sul_pool{sul::load_pool_from_csv(path, expected_classes)};
  });
}

sul_status sul_pool_save_csv(const sul_pool* pool, const char* path) {
  return wrap([&] {
    require(pool != nullptr && path != nullptr, "pool/path is null");
    sul::save_pool_to_csv(pool->value, path);
  });
}

sul_status sul_pool_corrupt(const sul_pool* pool, const char* const* subject_ids,
                            size_t n_subjects, double flip_rate, int32_t flip_mode,
                            int32_t fixed_target_class, const double* feature_shift,
                            uint64_t seed, sul_pool** out) {
  return wrap([&] {
    require(pool != nullptr && out != nullptr, "pool/out is null");
    require(subject_ids != nullptr || n_subjects == 0, "subject_ids is null");
    std::set<std::string> targets;
    for (size_t i = 0; i < n_subjects; ++i) targets.insert(subject_ids[i]);
    sul::CorruptionProfile profile;
    profile.label_flip_rate = flip_rate;
    profile.flip_mode = flip_mode == 1 ? sul::FlipMode::FixedTargetClass
                                       : sul::FlipMode::UniformRandomOtherClass;
    profile.fixed_target_class = fixed_target_class;
    if (feature_shift)
      profile.feature_shift.assign(feature_shift,
                                   feature_shift + pool->value.feature_dim());
    *out = new sul_pool{sul::corrupt_subjects(pool->value, targets, profile, seed)};
  });
}

size_t sul_pool_num_subjects(const sul_pool* pool) {
  return pool ? pool->value.num_subjects() : 0;
}
size_t sul_pool_num_clips(const sul_pool* pool) { return pool ? pool->value.num_clips() : 0; }
int32_t sul_pool_feature_dim(const sul_pool* pool) {
  return pool ? pool->value.feature_dim() : 0;
}
int32_t sul_pool_num_classes(const sul_pool* pool) {
  return pool ? pool->value.num_classes() : 0;
}
void sul_pool_free(sul_pool* pool) { delete pool; }

/* ---- ledger I/O -------------------------------------------------------- */

sul_status sul_ledger_save(const sul_ledger* ledger, const char* path) {
  return wrap([&] {
    require(ledger != nullptr && path != nullptr, "ledger/path is null");
    sul::ComputeLedger l;
    l.gradient_steps = ledger->gradient_steps;
    l.clips_processed = ledger->clips_processed;
    l.wall_seconds = ledger->wall_seconds;
    sul::save_ledger(path, l);
  });
}

sul_status sul_ledger_load(const char* path, sul_ledger* out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    fill_ledger(out, sul::load_ledger(path));
  });
}

/* ---- split ----------------------------------------------------------- */

sul_status sul_split_make(const sul_pool* pool, double eval_fraction, uint64_t seed,
                          sul_split** out) {
  return wrap([&] {
    require(pool != nullptr && out != nullptr, "pool/out is null");
    *out = new sul_split{sul::split_subject_disjoint(pool->value, eval_fraction, seed)};
  });
}

size_t sul_split_train_count(const sul_split* split) {
  return split ? split->value.train_subjects.size() : 0;
}
size_t sul_split_eval_count(const sul_split* split) {
  return split ? split->value.eval_subjects.size() : 0;
}
void sul_split_free(sul_split* split) { delete split; }

/* ---- model ------------------------------------------------------------ */

sul_status sul_model_load(const char* path, sul_model** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    sul::Checkpoint ck = sul::load_checkpoint(path);
    *out = new sul_model{std::move(ck.state), std::move(ck.provenance)};
  });
}

sul_status sul_model_save(const sul_model* model, const char* path) {
  return wrap([&] {
    require(model != nullptr && path != nullptr, "model/path is null");
    sul::save_checkpoint(path, model->state, model->provenance);
  });
}

sul_status sul_model_predict(const sul_model* model, const double* features, size_t feature_dim,
                             double* probs) {
  return wrap([&] {
    require(model != nullptr && features != nullptr && probs != nullptr,
            "model/features/probs is null");
    const auto pred =
        sul::forward(model->state, std::span<const double>(features, feature_dim));
    std::memcpy(probs, pred.probs.data(), pred.probs.size() * sizeof(double));
  });
}

int32_t sul_model_feature_dim(const sul_model* model) { return model ? model->state.arch.d : 0; }
int32_t sul_model_num_classes(const sul_model* model) { return model ? model->state.arch.c : 0; }
const char* sul_model_stage(const sul_model* model) {
  return model ? model->provenance.stage.c_str() : "";
}
void sul_model_free(sul_model* model) { delete model; }

/* ---- training ---------------------------------------------------------- */

sul_status sul_train_baseline(const sul_pool* pool, const sul_split* split,
                              const sul_protocol* protocol, int32_t hidden_dim, sul_model** out,
                              sul_ledger* ledger) {
  return wrap([&] {
    require(pool && split && protocol && out, "pool/split/protocol/out is null");
    sul::TrainResult result =
        sul::train_baseline(pool->value, split->value, to_protocol(*protocol), hidden_dim);
    fill_ledger(ledger, result.ledger);
    sul::Provenance prov;
    prov.stage = sul::kStageBaseline;
    prov.seed = protocol->seed;
    *out = new sul_model{std::move(result.model), std::move(prov)};
  });
}

sul_status sul_train_oracle(const sul_pool* pool, const sul_split* split,
                            const sul_forget_set* forget_set, const sul_protocol* protocol,
                            int32_t hidden_dim, sul_model** out, sul_ledger* ledger) {
  return wrap([&] {
    require(pool && split && forget_set && protocol && out,
            "pool/split/forget_set/protocol/out is null");
    sul::TrainResult result = sul::train_oracle(pool->value, split->value, forget_set->value,
                                                to_protocol(*protocol), hidden_dim);
    fill_ledger(ledger, result.ledger);
    sul::Provenance prov;
    prov.stage = sul::kStageOracle;
    prov.seed = protocol->seed;
    prov.forget_subjects = forget_set->value.subjects;
    prov.forget_set_hash = forget_set->hash;
    *out = new sul_model{std::move(result.model), std::move(prov)};
  });
}

sul_status sul_finetune_naive(const sul_model* baseline, const sul_pool* pool,
                              const sul_split* split, const sul_forget_set* forget_set,
                              const sul_protocol* short_protocol, sul_model** out,
                              sul_ledger* ledger) {
  return wrap([&] {
    require(baseline && pool && split && forget_set && short_protocol && out,
            "baseline/pool/split/forget_set/protocol/out is null");
    sul::TrainResult result = sul::finetune_naive(baseline->state, pool->value, split->value,
                                                  forget_set->value, to_protocol(*short_protocol));
    fill_ledger(ledger, result.ledger);
    sul::Provenance prov;
    prov.stage = sul::kStageNaiveFt;
    prov.seed = short_protocol->seed;
    prov.forget_subjects = forget_set->value.subjects;
    prov.forget_set_hash = forget_set->hash;
    *out = new sul_model{std::move(result.model), std::move(prov)};
  });
}

/* ---- scoring ----------------------------------------------------------- */

sul_status sul_score_subjects(const sul_model* baseline, const sul_pool* pool,
                              const sul_split* split, sul_ranking** out) {
  return wrap([&] {
    require(baseline && pool && split && out, "baseline/pool/split/out is null");
    *out = new sul_ranking{sul::score_subjects(baseline->state, pool->value, split->value)};
  });
}

size_t sul_ranking_size(const sul_ranking* ranking) {
  return ranking ? ranking->value.size() : 0;
}

sul_status sul_ranking_entry(const sul_ranking* ranking, size_t index, const char** subject_id,
                             double* score, int32_t* clip_count) {
  return wrap([&] {
    require(ranking != nullptr, "ranking is null");
    require(index < ranking->value.size(), "ranking index out of range");
    const sul::SubjectScore& entry = ranking->value[index];
    if (subject_id) *subject_id = entry.subject_id.c_str();
    if (score) *score = entry.score;
    if (clip_count) *clip_count = entry.clip_count;
  });
}

sul_status sul_ranking_save_csv(const sul_ranking* ranking, const char* path) {
  return wrap([&] {
    require(ranking != nullptr && path != nullptr, "ranking/path is null");
    sul::save_ranking_csv(ranking->value, path);
  });
}

sul_status sul_forget_set_build(const sul_ranking* ranking, int32_t k, sul_forget_set** out) {
  return wrap([&] {
    require(ranking != nullptr && out != nullptr, "ranking/out is null");
    sul::ForgetSet fs = sul::build_forget_set(ranking->value, k);
    std::string hash = sul::forget_set_hash(fs);
    *out = new sul_forget_set{std::move(fs), std::move(hash)};
  });
}

size_t sul_forget_set_size(const sul_forget_set* fs) { return fs ? fs->value.subjects.size() : 0; }

const char* sul_forget_set_subject(const sul_forget_set* fs, size_t index) {
  if (!fs || index >= fs->value.subjects.size()) return nullptr;
  return fs->value.subjects[index].c_str();
}

const char* sul_forget_set_hash_hex(const sul_forget_set* fs) {
  return fs ? fs->hash.c_str() : "";
}

void sul_ranking_free(sul_ranking* ranking) { delete ranking; }
void sul_forget_set_free(sul_forget_set* fs) { delete fs; }

/* ---- unlearning ---------------------------------------------------------- */

sul_status sul_unlearn_run(const sul_model* baseline, const sul_pool* pool,
                           const sul_split* split, const sul_forget_set* forget_set,
                           const sul_unlearn_params* params, const char* trace_csv_path,
                           sul_model** out, sul_ledger* ledger) {
  return wrap([&] {
    require(baseline && pool && split && forget_set && params && out,
            "baseline/pool/split/forget_set/params/out is null");
    const sul::TrainPartition part =
        sul::partition(pool->value, split->value, forget_set->value);
    sul::UnlearnConfig config;
    config.lambda_cons = params->lambda_cons;
    config.lambda_forg = params->lambda_forg;
    config.lambda_reg = params->lambda_reg;
    config.steps = params->steps;
    config.learning_rate = params->learning_rate;
    config.batch_r = params->batch_r;
    config.batch_f = params->batch_f;
    config.seed = params->seed;
    sul::UnlearnResult result =
        sul::run_unlearning(baseline->state, part.retained, part.forgotten, config);
    if (trace_csv_path) sul::save_trace_csv(result.trace, trace_csv_path);
    fill_ledger(ledger, result.ledger);
    sul::Provenance prov;
    prov.stage = sul::kStageUnlearned;
    prov.seed = params->seed;
    prov.forget_subjects = forget_set->value.subjects;
    prov.forget_set_hash = forget_set->hash;
    *out = new sul_model{std::move(result.model), std::move(prov)};
  });
}

sul_status sul_forgetting_strength(const sul_model* baseline, const sul_model* updated,
                                   const sul_pool* pool, const sul_split* split,
                                   const sul_forget_set* forget_set, double* out) {
  return wrap([&] {
    require(baseline && updated && pool && split && forget_set && out,
            "baseline/updated/pool/split/forget_set/out is null");
    const sul::TrainPartition part =
        sul::partition(pool->value, split->value, forget_set->value);
    *out = sul::forgetting_strength(baseline->state, updated->state, part.forgotten);
  });
}

/* ---- metrics --------------------------------------------------------------- */

sul_status sul_evaluate(const sul_model* model, const sul_pool* pool, const sul_split* split,
                        int32_t split_tag, const sul_forget_set* forget_set, double* accuracy,
                        uint64_t* confusion) {
  return wrap([&] {
    require(model && pool && split && accuracy, "model/pool/split/accuracy is null");
    std::vector<const sul::ClipRecord*> clips;
    sul::SplitTag tag = sul::SplitTag::Eval;
    if (split_tag == 0) {
      clips = sul::collect_clips(pool->value, split->value.eval_subjects);
    } else {
      require(split_tag == 1 || split_tag == 2, "split_tag must be 0, 1 or 2");
      const sul::ForgetSet empty = sul::empty_forget_set();
      const sul::ForgetSet& fs = forget_set ? forget_set->value : empty;
      const sul::TrainPartition part = sul::partition(pool->value, split->value, fs);
      if (split_tag == 1) {
        clips = part.retained;
        tag = sul::SplitTag::TrainRetained;
      } else {
        clips = part.forgotten;
        tag = sul::SplitTag::TrainForgotten;
      }
    }
    const sul::EvalReport report = sul::evaluate(model->state, clips, tag);
    *accuracy = report.accuracy;
    if (confusion)
      std::memcpy(confusion, report.confusion.data(),
                  report.confusion.size() * sizeof(uint64_t));
  });
}

sul_status sul_ogr(double m_b, double m_u, double m_o, sul_ogr_record* out) {
  return wrap([&] {
    require(out != nullptr, "out is null");
    const sul::OgrRecord rec = sul::ogr(m_b, m_u, m_o);
    out->m_b = rec.m_b;
    out->m_u = rec.m_u;
    out->m_o = rec.m_o;
    out->delta_oracle = rec.delta_oracle;
    out->delta_res = rec.delta_res;
    out->defined = rec.ogr.has_value() ? 1 : 0;
    out->ogr = rec.ogr.value_or(0.0);
  });
}

sul_status sul_relative_compute(const sul_ledger* stage, const sul_ledger* baseline,
                                double* out) {
  return wrap([&] {
    require(stage && baseline && out, "stage/baseline/out is null");
    sul::ComputeLedger s, b;
    s.gradient_steps = stage->gradient_steps;
    s.clips_processed = stage->clips_processed;
    b.gradient_steps = baseline->gradient_steps;
    b.clips_processed = baseline->clips_processed;
    *out = sul::relative_compute(s, b);
  });
}

/* ---- harness --------------------------------------------------------------- */

sul_status sul_config_load(const char* path, sul_config** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    *out = new sul_config{sul::load_scenario_config(path)};
  });
}

sul_status sul_config_override(sul_config* config, const char* seed, const char* output_dir,
                               const char* formats) {
  return wrap([&] {
    require(config != nullptr, "config is null");
    if (seed) {
      uint64_t value = 0;
      auto [ptr, ec] = std::from_chars(seed, seed + std::strlen(seed), value);
      if (ec != std::errc() || ptr != seed + std::strlen(seed))
        sul::raise(sul::ErrorCode::Config, "--seed must be an unsigned integer");
      config->value.seeds = {value};
    }
    if (output_dir) config->value.output_dir = output_dir;
    if (formats) {
      std::vector<std::string> parsed;
      std::string current;
      for (const char* p = formats;; ++p) {
        if (*p == ',' || *p == '\0') {
          if (!current.empty()) parsed.push_back(current);
          current.clear();
          if (*p == '\0') break;
        } else {
          current += *p;
        }
      }
      for (const std::string& f : parsed)
        if (f != "csv" && f != "json")
          sul::raise(sul::ErrorCode::Config, "--format may contain only csv and json");
      if (parsed.empty())
        sul::raise(sul::ErrorCode::Config, "--format must name at least one format");
      config->value.formats = parsed;
    }
  });
}

const char* sul_config_output_dir(const sul_config* config) {
  return config ? config->value.output_dir.c_str() : "";
}

size_t sul_config_num_ks(const sul_config* config) { return config ? config->value.ks.size() : 0; }

void sul_config_free(sul_config* config) { delete config; }

sul_status sul_config_prepare_pool(const sul_config* config, sul_pool** out_pool,
                                   sul_split** out_split) {
  return wrap([&] {
    require(config != nullptr && out_pool != nullptr, "config/out_pool is null");
    sul::PreparedData data = sul::prepare_data(config->value, config->value.seeds.front());
    *out_pool = new sul_pool{std::move(data.pool)};
    if (out_split) *out_split = new sul_split{std::move(data.manifest)};
  });
}

sul_status sul_config_stage_seeds(const sul_config* config, uint64_t* train_seed,
                                  uint64_t* unlearn_seed_base, uint64_t* naive_seed_base) {
  return wrap([&] {
    require(config != nullptr, "config is null");
    const sul::StageSeeds seeds =
        sul::make_stage_seeds(config->value, config->value.seeds.front());
    if (train_seed) *train_seed = seeds.train;
    if (unlearn_seed_base) *unlearn_seed_base = seeds.unlearn_base;
    if (naive_seed_base) *naive_seed_base = seeds.naive_base;
  });
}

sul_status sul_config_protocol(const sul_config* config, sul_protocol* out) {
  return wrap([&] {
    require(config != nullptr && out != nullptr, "config/out is null");
    const sul::StageSeeds seeds =
        sul::make_stage_seeds(config->value, config->value.seeds.front());
    *out = from_protocol(sul::materialize_protocol(config->value, seeds.train));
  });
}

sul_status sul_config_short_ft(const sul_config* config, int32_t k, sul_protocol* out) {
  return wrap([&] {
    require(config != nullptr && out != nullptr, "config/out is null");
    const sul::StageSeeds seeds =
        sul::make_stage_seeds(config->value, config->value.seeds.front());
    *out = from_protocol(sul::materialize_short_ft(config->value, seeds.naive_base, k));
  });
}

sul_status sul_config_unlearn_params(const sul_config* config, const sul_ledger* baseline_ledger,
                                     int32_t k, sul_unlearn_params* out) {
  return wrap([&] {
    require(config != nullptr && baseline_ledger != nullptr && out != nullptr,
            "config/baseline_ledger/out is null");
    const sul::StageSeeds seeds =
        sul::make_stage_seeds(config->value, config->value.seeds.front());
    sul::ComputeLedger ledger;
    ledger.gradient_steps = baseline_ledger->gradient_steps;
    ledger.clips_processed = baseline_ledger->clips_processed;
    const sul::UnlearnConfig ucfg =
        sul::materialize_unlearn_config(config->value, ledger, seeds.unlearn_base, k);
    out->lambda_cons = ucfg.lambda_cons;
    out->lambda_forg = ucfg.lambda_forg;
    out->lambda_reg = ucfg.lambda_reg;
    out->steps = ucfg.steps;
    out->learning_rate = ucfg.learning_rate;
    out->batch_r = ucfg.batch_r;
    out->batch_f = ucfg.batch_f;
    out->seed = ucfg.seed;
  });
}

int32_t sul_config_hidden_dim(const sul_config* config) {
  return config ? config->value.hidden_dim : 0;
}

sul_status sul_scenario_run(const sul_config* config, sul_report** out) {
  return wrap([&] {
    require(config != nullptr && out != nullptr, "config/out is null");
    *out = new sul_report{sul::run_scenario(config->value)};
  });
}

sul_status sul_report_load(const char* report_json_path, sul_report** out) {
  return wrap([&] {
    require(report_json_path != nullptr && out != nullptr, "path/out is null");
    *out = new sul_report{sul::load_report(report_json_path)};
  });
}

sul_status sul_report_emit(const sul_report* report, const char* out_dir, const char* formats) {
  return wrap([&] {
    require(report != nullptr && out_dir != nullptr, "report/out_dir is null");
    std::vector<std::string> parsed;
    if (formats) {
      std::string current;
      for (const char* p = formats;; ++p) {
        if (*p == ',' || *p == '\0') {
          if (!current.empty()) parsed.push_back(current);
          current.clear();
          if (*p == '\0') break;
        } else {
          current += *p;
        }
      }
    }
    if (parsed.empty()) parsed = report->value.config.formats;
    sul::emit_report(report->value, out_dir, parsed);
  });
}

sul_status sul_report_emit_series(const sul_report* report, const char* out_dir) {
  return wrap([&] {
    require(report != nullptr && out_dir != nullptr, "report/out_dir is null");
    sul::emit_series_csv(sul::sweep_to_series(report->value), out_dir);
  });
}

size_t sul_report_num_seeds(const sul_report* report) {
  return report ? report->value.seeds.size() : 0;
}

void sul_report_free(sul_report* report) { delete report; }

} /* extern "C" */
