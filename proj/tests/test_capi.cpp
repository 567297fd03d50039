// SPDX-License-Identifier: Apache-2.0
//
// Exercises the shared-library C API end to end through handles and status
// codes, the same way an external binding would.
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sul.h"

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

sul_protocol make_protocol(int epochs, uint64_t seed) {
  sul_protocol protocol;
  protocol.epochs = epochs;
  protocol.batch_size = 8;
  protocol.learning_rate = 0.15;
  protocol.seed = seed;
  protocol.selection = 0;
  return protocol;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(sul_version()) == "0.1.0");
  sul_pool* pool = nullptr;
  CHECK(sul_pool_load_csv("/definitely/not/here.csv", 0, &pool) == SUL_ERR_IO);
  CHECK(std::strlen(sul_last_error()) > 0);
  CHECK(sul_pool_generate(5, 2, 4, 3, 2, 2.0, 1, &pool) == SUL_OK);
  CHECK(std::strlen(sul_last_error()) == 0);
  sul_pool_free(pool);
  CHECK(sul_pool_generate(1, 2, 4, 3, 2, 2.0, 1, &pool) == SUL_ERR_PARAM);
}

TEST_CASE("full pipeline through the C API") {
  sul_pool* clean = nullptr;
  REQUIRE(sul_pool_generate(12, 6, 10, 4, 2, 3.5, 7, &clean) == SUL_OK);
  CHECK(sul_pool_num_subjects(clean) == 12);
  CHECK(sul_pool_feature_dim(clean) == 4);
  CHECK(sul_pool_num_classes(clean) == 2);

  // corrupt two subjects
  const char* targets[] = {"s002", "s005"};
  sul_pool* pool = nullptr;
  REQUIRE(sul_pool_corrupt(clean, targets, 2, 0.9, 0, 0, nullptr, 3, &pool) == SUL_OK);
  sul_pool_free(clean);

  sul_split* split = nullptr;
  REQUIRE(sul_split_make(pool, 0.25, 11, &split) == SUL_OK);
  CHECK(sul_split_train_count(split) == 9);
  CHECK(sul_split_eval_count(split) == 3);

  sul_model* baseline = nullptr;
  sul_ledger baseline_ledger;
  const sul_protocol protocol = make_protocol(10, 21);
  REQUIRE(sul_train_baseline(pool, split, &protocol, 6, &baseline, &baseline_ledger) == SUL_OK);
  CHECK(baseline_ledger.gradient_steps > 0);
  CHECK(std::string(sul_model_stage(baseline)) == "baseline");

  // prediction normalizes
  const double x[4] = {0.5, -0.25, 1.0, 0.0};
  double probs[2] = {0, 0};
  REQUIRE(sul_model_predict(baseline, x, 4, probs) == SUL_OK);
  CHECK(std::abs(probs[0] + probs[1] - 1.0) <= 1e-9);

  // checkpoint round trip
  const std::string ck_path = temp_path("sul_capi_baseline.json");
  REQUIRE(sul_model_save(baseline, ck_path.c_str()) == SUL_OK);
  sul_model* reloaded = nullptr;
  REQUIRE(sul_model_load(ck_path.c_str(), &reloaded) == SUL_OK);
  double probs2[2] = {0, 0};
  REQUIRE(sul_model_predict(reloaded, x, 4, probs2) == SUL_OK);
  CHECK(probs[0] == probs2[0]);
  sul_model_free(reloaded);
  fs::remove(ck_path);

  // ledger round trip
  const std::string ledger_path = temp_path("sul_capi_ledger.json");
  REQUIRE(sul_ledger_save(&baseline_ledger, ledger_path.c_str()) == SUL_OK);
  sul_ledger ledger_back;
  REQUIRE(sul_ledger_load(ledger_path.c_str(), &ledger_back) == SUL_OK);
  CHECK(ledger_back.gradient_steps == baseline_ledger.gradient_steps);
  fs::remove(ledger_path);

  // scoring and forget-set
  sul_ranking* ranking = nullptr;
  REQUIRE(sul_score_subjects(baseline, pool, split, &ranking) == SUL_OK);
  CHECK(sul_ranking_size(ranking) == 9);
  const char* top_subject = nullptr;
  double top_score = 0.0;
  int32_t top_clips = 0;
  REQUIRE(sul_ranking_entry(ranking, 0, &top_subject, &top_score, &top_clips) == SUL_OK);
  CHECK(top_score >= 0.0);
  CHECK(top_clips >= 6);

  sul_forget_set* forget = nullptr;
  REQUIRE(sul_forget_set_build(ranking, 2, &forget) == SUL_OK);
  CHECK(sul_forget_set_size(forget) == 2);
  CHECK(std::string(sul_forget_set_subject(forget, 0)) == top_subject);
  CHECK(std::strlen(sul_forget_set_hash_hex(forget)) == 16);
  sul_forget_set* too_big = nullptr;
  CHECK(sul_forget_set_build(ranking, 9, &too_big) == SUL_ERR_PARAM);

  // unlearning with a trace
  sul_unlearn_params params;
  params.lambda_cons = 1.0;
  params.lambda_forg = 0.25;
  params.lambda_reg = 0.05;
  params.steps = baseline_ledger.gradient_steps / 4;
  params.learning_rate = 0.03;
  params.batch_r = 8;
  params.batch_f = 8;
  params.seed = 31;
  const std::string trace_path = temp_path("sul_capi_trace.csv");
  sul_model* unlearned = nullptr;
  sul_ledger unlearn_ledger;
  REQUIRE(sul_unlearn_run(baseline, pool, split, forget, &params, trace_path.c_str(), &unlearned,
                          &unlearn_ledger) == SUL_OK);
  CHECK(unlearn_ledger.gradient_steps == params.steps);
  CHECK(fs::exists(trace_path));
  {
    std::ifstream trace(trace_path);
    std::string header;
    std::getline(trace, header);
    CHECK(header == "step,l_ret,l_cons,l_forg,l_reg,l_unl");
  }
  fs::remove(trace_path);
  CHECK(std::string(sul_model_stage(unlearned)) == "unlearned");

  double rel = 0.0;
  REQUIRE(sul_relative_compute(&unlearn_ledger, &baseline_ledger, &rel) == SUL_OK);
  CHECK(rel <= 0.3);

  double strength = 0.0;
  REQUIRE(sul_forgetting_strength(baseline, unlearned, pool, split, forget, &strength) == SUL_OK);

  // oracle and naive arms
  sul_model* oracle = nullptr;
  sul_ledger oracle_ledger;
  REQUIRE(sul_train_oracle(pool, split, forget, &protocol, 6, &oracle, &oracle_ledger) == SUL_OK);
  CHECK(oracle_ledger.gradient_steps <= baseline_ledger.gradient_steps);

  sul_protocol short_ft = make_protocol(2, 41);
  sul_model* naive = nullptr;
  sul_ledger naive_ledger;
  REQUIRE(sul_finetune_naive(baseline, pool, split, forget, &short_ft, &naive, &naive_ledger) ==
          SUL_OK);

  // evaluation on the three split tags
  double acc_eval = 0.0, acc_retained = 0.0, acc_forgotten = 0.0;
  REQUIRE(sul_evaluate(baseline, pool, split, 0, nullptr, &acc_eval, nullptr) == SUL_OK);
  REQUIRE(sul_evaluate(baseline, pool, split, 1, forget, &acc_retained, nullptr) == SUL_OK);
  REQUIRE(sul_evaluate(baseline, pool, split, 2, forget, &acc_forgotten, nullptr) == SUL_OK);
  CHECK(acc_eval >= 0.0);
  CHECK(acc_eval <= 1.0);

  sul_ogr_record record;
  REQUIRE(sul_ogr(0.70, 0.73, 0.75, &record) == SUL_OK);
  CHECK(record.defined == 1);
  CHECK(std::abs(record.ogr - 0.6) <= 1e-9);
  REQUIRE(sul_ogr(0.70, 0.73, 0.65, &record) == SUL_OK);
  CHECK(record.defined == 0);

  sul_model_free(naive);
  sul_model_free(oracle);
  sul_model_free(unlearned);
  sul_forget_set_free(forget);
  sul_ranking_free(ranking);
  sul_model_free(baseline);
  sul_split_free(split);
  sul_pool_free(pool);
}

TEST_CASE("pool csv save/load through the C API") {
  sul_pool* pool = nullptr;
  REQUIRE(sul_pool_generate(6, 2, 4, 3, 3, 2.0, 17, &pool) == SUL_OK);
  const std::string path = temp_path("sul_capi_pool.csv");
  REQUIRE(sul_pool_save_csv(pool, path.c_str()) == SUL_OK);
  sul_pool* loaded = nullptr;
  REQUIRE(sul_pool_load_csv(path.c_str(), 3, &loaded) == SUL_OK);
  CHECK(sul_pool_num_clips(loaded) == sul_pool_num_clips(pool));
  CHECK(sul_pool_num_subjects(loaded) == 6);
  sul_pool_free(loaded);
  sul_pool_free(pool);
  fs::remove(path);
}

TEST_CASE("scenario run, emission and reload through the C API") {
  const std::string cfg_path = temp_path("sul_capi_config.cfg");
  {
    std::ofstream cfg(cfg_path);
    cfg << "[data]\nnum_subjects = 8\nclips_min = 3\nclips_max = 5\nfeature_dim = 3\n"
           "num_classes = 2\nclass_separation = 3.0\nseed = 5\neval_fraction = 0.25\n"
           "[corruption]\nnum_targets = 1\nflip_rate = 0.9\n"
           "[model]\nhidden_dim = 4\n"
           "[protocol]\nepochs = 4\nbatch_size = 8\nlearning_rate = 0.1\n"
           "[scenario]\nks = 1,2\nseeds = 1,2\noutput_dir = unused\n";
  }
  sul_config* config = nullptr;
  REQUIRE(sul_config_load(cfg_path.c_str(), &config) == SUL_OK);
  CHECK(sul_config_num_ks(config) == 2);
  REQUIRE(sul_config_override(config, "9", temp_path("sul_capi_out").c_str(), "json") == SUL_OK);
  CHECK(std::string(sul_config_output_dir(config)) == temp_path("sul_capi_out"));

  sul_report* report = nullptr;
  REQUIRE(sul_scenario_run(config, &report) == SUL_OK);
  CHECK(sul_report_num_seeds(report) == 1);  // seed override collapsed the list

  const std::string out_dir = temp_path("sul_capi_out");
  REQUIRE(sul_report_emit(report, out_dir.c_str(), "csv,json") == SUL_OK);
  CHECK(fs::exists(fs::path(out_dir) / "report.json"));
  REQUIRE(sul_report_emit_series(report, out_dir.c_str()) == SUL_OK);
  CHECK(fs::exists(fs::path(out_dir) / "series_accuracy.csv"));

  sul_report* reloaded = nullptr;
  REQUIRE(sul_report_load((fs::path(out_dir) / "report.json").string().c_str(), &reloaded) ==
          SUL_OK);
  CHECK(sul_report_num_seeds(reloaded) == 1);
  sul_report_free(reloaded);
  sul_report_free(report);
  sul_config_free(config);
  fs::remove_all(out_dir);
  fs::remove(cfg_path);
}

TEST_CASE("null arguments are parameter errors, not crashes") {
  CHECK(sul_pool_generate(5, 1, 2, 2, 2, 1.0, 0, nullptr) == SUL_ERR_PARAM);
  CHECK(sul_pool_save_csv(nullptr, "x") == SUL_ERR_PARAM);
  CHECK(sul_model_load(nullptr, nullptr) == SUL_ERR_PARAM);
  sul_ogr_record record;
  CHECK(sul_ogr(1, 2, 3, nullptr) == SUL_ERR_PARAM);
  CHECK(sul_ogr(1, 2, 3, &record) == SUL_OK);
  CHECK(sul_config_load(nullptr, nullptr) == SUL_ERR_PARAM);
  sul_pool_free(nullptr);
  sul_model_free(nullptr);
  sul_report_free(nullptr);
}
