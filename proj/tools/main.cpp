// SPDX-License-Identifier: Apache-2.0
//
// sul command-line tool. Thin shell over the libsul C API: argument parsing,
// file-name conventions and printing live here, everything else behind the
// shared library.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sul.h"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void fail(sul_status status) {
  const int code = status == SUL_ERR_CONFIG ? kExitConfigError : kExitRuntimeError;
  throw CliError{code, sul_last_error()};
}

void check(sul_status status) {
  if (status != SUL_OK) fail(status);
}

// RAII wrappers over the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  explicit Handle(T* p) : ptr(p) {}
  ~Handle() { Free(ptr); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& other) noexcept : ptr(other.ptr) { other.ptr = nullptr; }
  Handle& operator=(Handle&& other) noexcept {
    if (this != &other) {
      Free(ptr);
      ptr = other.ptr;
      other.ptr = nullptr;
    }
    return *this;
  }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using PoolHandle = Handle<sul_pool, sul_pool_free>;
using SplitHandle = Handle<sul_split, sul_split_free>;
using ModelHandle = Handle<sul_model, sul_model_free>;
using RankingHandle = Handle<sul_ranking, sul_ranking_free>;
using ForgetSetHandle = Handle<sul_forget_set, sul_forget_set_free>;
using ConfigHandle = Handle<sul_config, sul_config_free>;
using ReportHandle = Handle<sul_report, sul_report_free>;

struct GlobalOptions {
  std::string config_path;
  std::string seed;    // empty = no override
  std::string out;     // empty = config output_dir
  std::string format;  // empty = config formats
};

ConfigHandle load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty())
    throw CliError{kExitConfigError, "--config <path> is required"};
  ConfigHandle config;
  check(sul_config_load(opts.config_path.c_str(), config.out()));
  check(sul_config_override(config.get(), opts.seed.empty() ? nullptr : opts.seed.c_str(),
                            opts.out.empty() ? nullptr : opts.out.c_str(),
                            opts.format.empty() ? nullptr : opts.format.c_str()));
  return config;
}

std::string out_dir(const ConfigHandle& config) {
  const std::string dir = sul_config_output_dir(config.get());
  fs::create_directories(dir);
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void prepare(const ConfigHandle& config, PoolHandle& pool, SplitHandle& split) {
  check(sul_config_prepare_pool(config.get(), pool.out(), split.out()));
}

ModelHandle load_baseline(const std::string& dir) {
  ModelHandle model;
  check(sul_model_load(join(dir, "baseline.json").c_str(), model.out()));
  return model;
}

ForgetSetHandle build_forget_set(const PoolHandle& pool, const SplitHandle& split,
                                 const ModelHandle& baseline, int k) {
  RankingHandle ranking;
  check(sul_score_subjects(baseline.get(), pool.get(), split.get(), ranking.out()));
  ForgetSetHandle forget;
  check(sul_forget_set_build(ranking.get(), k, forget.out()));
  return forget;
}

// Small run manifest next to each checkpoint: the protocol that produced it,
// its seed and the forget-set fingerprint when one applies.
void write_run_manifest(const std::string& path, const sul_protocol& protocol,
                        const char* forget_set_hash) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw CliError{kExitRuntimeError, "cannot write " + path};
  std::fprintf(f,
               "{\n  \"epochs\": %d,\n  \"batch_size\": %d,\n  \"learning_rate\": %.17g,\n"
               "  \"seed\": %llu,\n  \"selection\": \"%s\",\n  \"forget_set_hash\": \"%s\"\n}\n",
               protocol.epochs, protocol.batch_size, protocol.learning_rate,
               (unsigned long long)protocol.seed,
               protocol.selection == 1 ? "best-train-loss" : "final-epoch",
               forget_set_hash ? forget_set_hash : "");
  std::fclose(f);
}

int cmd_generate(const GlobalOptions& opts) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  const std::string dir = out_dir(config);
  const std::string path = join(dir, "pool.csv");
  check(sul_pool_save_csv(pool.get(), path.c_str()));
  std::printf("wrote %s (%zu subjects, %zu clips, d=%d, C=%d)\n", path.c_str(),
              sul_pool_num_subjects(pool.get()), sul_pool_num_clips(pool.get()),
              sul_pool_feature_dim(pool.get()), sul_pool_num_classes(pool.get()));
  return kExitOk;
}

int cmd_train_baseline(const GlobalOptions& opts) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  sul_protocol protocol;
  check(sul_config_protocol(config.get(), &protocol));
  ModelHandle model;
  sul_ledger ledger;
  check(sul_train_baseline(pool.get(), split.get(), &protocol,
                           sul_config_hidden_dim(config.get()), model.out(), &ledger));
  const std::string dir = out_dir(config);
  check(sul_model_save(model.get(), join(dir, "baseline.json").c_str()));
  check(sul_ledger_save(&ledger, join(dir, "ledger_baseline.json").c_str()));
  write_run_manifest(join(dir, "run_baseline.json"), protocol, nullptr);
  std::printf("baseline trained: %llu steps, %llu clips -> %s\n",
              (unsigned long long)ledger.gradient_steps,
              (unsigned long long)ledger.clips_processed,
              join(dir, "baseline.json").c_str());
  return kExitOk;
}

int cmd_score(const GlobalOptions& opts) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  const std::string dir = out_dir(config);
  ModelHandle baseline = load_baseline(dir);
  RankingHandle ranking;
  check(sul_score_subjects(baseline.get(), pool.get(), split.get(), ranking.out()));
  const std::string path = join(dir, "ranking.csv");
  check(sul_ranking_save_csv(ranking.get(), path.c_str()));
  std::printf("wrote %s (%zu subjects)\n", path.c_str(), sul_ranking_size(ranking.get()));
  const size_t show = std::min<size_t>(5, sul_ranking_size(ranking.get()));
  for (size_t i = 0; i < show; ++i) {
    const char* sid = nullptr;
    double score = 0.0;
    int32_t clips = 0;
    check(sul_ranking_entry(ranking.get(), i, &sid, &score, &clips));
    std::printf("  %zu. %s  score=%.4f  clips=%d\n", i + 1, sid, score, clips);
  }
  return kExitOk;
}

int cmd_unlearn(const GlobalOptions& opts, int k) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  const std::string dir = out_dir(config);
  ModelHandle baseline = load_baseline(dir);
  ForgetSetHandle forget = build_forget_set(pool, split, baseline, k);

  sul_ledger baseline_ledger;
  check(sul_ledger_load(join(dir, "ledger_baseline.json").c_str(), &baseline_ledger));
  sul_unlearn_params params;
  check(sul_config_unlearn_params(config.get(), &baseline_ledger, k, &params));

  const std::string tag = "_k" + std::to_string(k);
  ModelHandle updated;
  sul_ledger ledger;
  check(sul_unlearn_run(baseline.get(), pool.get(), split.get(), forget.get(), &params,
                        join(dir, "trace" + tag + ".csv").c_str(), updated.out(), &ledger));
  check(sul_model_save(updated.get(), join(dir, "unlearned" + tag + ".json").c_str()));
  check(sul_ledger_save(&ledger, join(dir, "ledger_unlearned" + tag + ".json").c_str()));

  double strength = 0.0;
  check(sul_forgetting_strength(baseline.get(), updated.get(), pool.get(), split.get(),
                                forget.get(), &strength));
  double rel = 0.0;
  check(sul_relative_compute(&ledger, &baseline_ledger, &rel));
  std::printf("unlearned k=%d (hash %s): %llu steps (%.2fx baseline), forgetting strength %.4f\n",
              k, sul_forget_set_hash_hex(forget.get()),
              (unsigned long long)ledger.gradient_steps, rel, strength);
  return kExitOk;
}

int cmd_train_oracle(const GlobalOptions& opts, int k) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  const std::string dir = out_dir(config);
  ModelHandle baseline = load_baseline(dir);
  ForgetSetHandle forget = build_forget_set(pool, split, baseline, k);
  sul_protocol protocol;
  check(sul_config_protocol(config.get(), &protocol));
  ModelHandle oracle;
  sul_ledger ledger;
  check(sul_train_oracle(pool.get(), split.get(), forget.get(), &protocol,
                         sul_config_hidden_dim(config.get()), oracle.out(), &ledger));
  const std::string tag = "_k" + std::to_string(k);
  check(sul_model_save(oracle.get(), join(dir, "oracle" + tag + ".json").c_str()));
  check(sul_ledger_save(&ledger, join(dir, "ledger_oracle" + tag + ".json").c_str()));
  write_run_manifest(join(dir, "run_oracle" + tag + ".json"), protocol,
                     sul_forget_set_hash_hex(forget.get()));
  std::printf("oracle trained k=%d: %llu steps -> %s\n", k,
              (unsigned long long)ledger.gradient_steps,
              join(dir, "oracle" + tag + ".json").c_str());
  return kExitOk;
}

int cmd_naive_ft(const GlobalOptions& opts, int k) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);
  const std::string dir = out_dir(config);
  ModelHandle baseline = load_baseline(dir);
  ForgetSetHandle forget = build_forget_set(pool, split, baseline, k);
  sul_protocol short_ft;
  check(sul_config_short_ft(config.get(), k, &short_ft));
  ModelHandle model;
  sul_ledger ledger;
  check(sul_finetune_naive(baseline.get(), pool.get(), split.get(), forget.get(), &short_ft,
                           model.out(), &ledger));
  const std::string tag = "_k" + std::to_string(k);
  check(sul_model_save(model.get(), join(dir, "naive" + tag + ".json").c_str()));
  check(sul_ledger_save(&ledger, join(dir, "ledger_naive" + tag + ".json").c_str()));
  write_run_manifest(join(dir, "run_naive" + tag + ".json"), short_ft,
                     sul_forget_set_hash_hex(forget.get()));
  std::printf("naive short finetune k=%d: %llu steps -> %s\n", k,
              (unsigned long long)ledger.gradient_steps,
              join(dir, "naive" + tag + ".json").c_str());
  return kExitOk;
}

int cmd_evaluate(const GlobalOptions& opts, const std::string& model_path,
                 const std::string& split_name, int k) {
  ConfigHandle config = load_config(opts);
  PoolHandle pool;
  SplitHandle split;
  prepare(config, pool, split);

  ModelHandle model;
  check(sul_model_load(model_path.c_str(), model.out()));

  int32_t tag = 0;
  if (split_name == "eval") tag = 0;
  else if (split_name == "retained") tag = 1;
  else if (split_name == "forgotten") tag = 2;
  else throw CliError{kExitConfigError, "--split must be eval, retained or forgotten"};

  ForgetSetHandle forget;
  if (tag != 0 && k > 0) {
    const std::string dir = out_dir(config);
    ModelHandle baseline = load_baseline(dir);
    forget = build_forget_set(pool, split, baseline, k);
  }
  if (tag == 2 && forget.get() == nullptr)
    throw CliError{kExitConfigError, "--split forgotten requires --k"};

  const int32_t c = sul_model_num_classes(model.get());
  std::vector<uint64_t> confusion(static_cast<size_t>(c) * c, 0);
  double accuracy = 0.0;
  check(sul_evaluate(model.get(), pool.get(), split.get(), tag, forget.get(), &accuracy,
                     confusion.data()));
  std::printf("model %s (%s) on %s split: accuracy %.2f%%\n", model_path.c_str(),
              sul_model_stage(model.get()), split_name.c_str(), 100.0 * accuracy);
  std::printf("confusion (rows = label, cols = predicted):\n");
  for (int32_t i = 0; i < c; ++i) {
    std::printf(" ");
    for (int32_t j = 0; j < c; ++j)
      std::printf(" %6llu", (unsigned long long)confusion[static_cast<size_t>(i) * c + j]);
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_run(const GlobalOptions& opts, bool with_series) {
  ConfigHandle config = load_config(opts);
  if (with_series && sul_config_num_ks(config.get()) < 2)
    throw CliError{kExitConfigError, "sweep needs at least two forget-set sizes in [scenario] ks"};
  ReportHandle report;
  check(sul_scenario_run(config.get(), report.out()));
  const std::string dir = sul_config_output_dir(config.get());
  check(sul_report_emit(report.get(), dir.c_str(), opts.format.empty() ? nullptr : opts.format.c_str()));
  if (with_series) check(sul_report_emit_series(report.get(), dir.c_str()));
  std::printf("scenario complete: %zu seed(s), report under %s\n",
              sul_report_num_seeds(report.get()), dir.c_str());
  return kExitOk;
}

int cmd_report(const GlobalOptions& opts, const std::string& report_path) {
  ReportHandle report;
  check(sul_report_load(report_path.c_str(), report.out()));
  const std::string dir =
      !opts.out.empty() ? opts.out : fs::path(report_path).parent_path().string();
  check(sul_report_emit(report.get(), dir.empty() ? "." : dir.c_str(),
                        opts.format.empty() ? nullptr : opts.format.c_str()));
  std::printf("re-emitted report to %s\n", dir.empty() ? "." : dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subject-level unlearning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "scenario config file");
  app.add_option("--seed", opts.seed, "override config seeds with a single seed");
  app.add_option("--out", opts.out, "override output directory");
  app.add_option("--format", opts.format, "output formats, comma list of csv,json");

  auto* generate = app.add_subcommand("generate", "generate the configured pool and write pool.csv");
  auto* train_baseline = app.add_subcommand("train-baseline", "train the baseline model");
  auto* score = app.add_subcommand("score", "rank training subjects under the baseline");

  int k_unlearn = 3, k_oracle = 3, k_naive = 3, k_eval = 0;
  auto* unlearn = app.add_subcommand("unlearn", "run the head-only unlearning update");
  unlearn->add_option("--k", k_unlearn, "forget-set size")->required();
  auto* train_oracle = app.add_subcommand("train-oracle", "retrain from scratch on retained subjects");
  train_oracle->add_option("--k", k_oracle, "forget-set size")->required();
  auto* naive_ft = app.add_subcommand("naive-ft", "short plain finetune on retained subjects");
  naive_ft->add_option("--k", k_naive, "forget-set size")->required();

  std::string model_path, split_name = "eval";
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
  evaluate->add_option("--model", model_path, "checkpoint path")->required();
  evaluate->add_option("--split", split_name, "eval | retained | forgotten");
  evaluate->add_option("--k", k_eval, "forget-set size for retained/forgotten");

  auto* run = app.add_subcommand("run", "run the full scenario and emit the report");
  auto* sweep = app.add_subcommand("sweep", "run the scenario and emit plot-ready K-sweep series");

  std::string report_path;
  auto* report = app.add_subcommand("report", "re-emit tables from an existing report.json");
  report->add_option("--report", report_path, "path to report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (generate->parsed()) return cmd_generate(opts);
    if (train_baseline->parsed()) return cmd_train_baseline(opts);
    if (score->parsed()) return cmd_score(opts);
    if (unlearn->parsed()) return cmd_unlearn(opts, k_unlearn);
    if (train_oracle->parsed()) return cmd_train_oracle(opts, k_oracle);
    if (naive_ft->parsed()) return cmd_naive_ft(opts, k_naive);
    if (evaluate->parsed()) return cmd_evaluate(opts, model_path, split_name, k_eval);
    if (run->parsed()) return cmd_run(opts, false);
    if (sweep->parsed()) return cmd_run(opts, true);
    if (report->parsed()) return cmd_report(opts, report_path);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  }
  return kExitConfigError;
}
