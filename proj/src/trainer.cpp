// SPDX-License-Identifier: Apache-2.0
#include "sul/trainer.hpp"

#include <chrono>
#include <limits>

#include "sul/error.hpp"
#include "sul/rng.hpp"

namespace sul {

namespace {

// Stream tags for deriving independent sub-seeds from one protocol seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

void check_protocol(const TrainProtocol& protocol) {
  if (protocol.epochs < 1)
    raise(ErrorCode::Param, "protocol: epochs must be >= 1");
  if (protocol.batch_size < 1)
    raise(ErrorCode::Param, "protocol: batch_size must be >= 1");
  if (!(protocol.learning_rate > 0.0))
    raise(ErrorCode::Param, "protocol: learning_rate must be positive");
}

void apply_sgd(std::vector<double>& params, const std::vector<double>& grad, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

TrainResult run_sgd(const std::vector<const ClipRecord*>& clips,
                    const TrainProtocol& protocol, ModelState state) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = clips.size();
  const Batch all = to_batch(clips);

  Rng shuffle_rng(derive_seed(protocol.seed, kShuffleStream));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  ModelState best_state = state;

  for (int epoch = 0; epoch < protocol.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(protocol.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(protocol.batch_size));
      Batch batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(all[order[i]]);

      const FullGrad grad = grad_full(state, batch);
      apply_sgd(state.backbone.w1, grad.w1, protocol.learning_rate);
      apply_sgd(state.backbone.b1, grad.b1, protocol.learning_rate);
      apply_sgd(state.head.w2, grad.head.w2, protocol.learning_rate);
      apply_sgd(state.head.b2, grad.head.b2, protocol.learning_rate);

      result.ledger.gradient_steps += 1;
      result.ledger.clips_processed += end - start;
      epoch_loss_sum += grad.mean_loss * static_cast<double>(end - start);
    }
    if (protocol.selection == Selection::BestTrainLoss) {
      const double epoch_loss = epoch_loss_sum / static_cast<double>(n);
      if (epoch_loss < best_loss) {
        best_loss = epoch_loss;
        best_state = state;
      }
    }
  }

  result.model = protocol.selection == Selection::BestTrainLoss ? best_state : state;
  result.ledger.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::set<std::string> retained_subjects(const SplitManifest& manifest, const ForgetSet& fs) {
  std::set<std::string> retained = manifest.train_subjects;
  for (const std::string& sid : fs.subjects) {
    if (!manifest.train_subjects.count(sid))
      raise(ErrorCode::Hygiene, "forget subject " + sid + " is not a training subject");
    retained.erase(sid);
  }
  if (retained.empty())
    raise(ErrorCode::Data, "forget set covers every training subject");
  return retained;
}

}  // namespace

Batch to_batch(const std::vector<const ClipRecord*>& clips) {
  Batch batch;
  batch.reserve(clips.size());
  for (const ClipRecord* clip : clips)
    batch.push_back({std::span<const double>(clip->features), clip->label});
  return batch;
}

TrainResult train_baseline(const SubjectPool& pool, const SplitManifest& manifest,
                           const TrainProtocol& protocol, int hidden_dim) {
  check_protocol(protocol);
  if (hidden_dim < 1)
    raise(ErrorCode::Param, "train_baseline: hidden_dim must be >= 1");
  if (manifest.train_subjects.empty())
    raise(ErrorCode::Data, "train_baseline: no training subjects");

  const auto clips = collect_clips(pool, manifest.train_subjects);
  if (clips.empty())
    raise(ErrorCode::Data, "train_baseline: training split has no clips");

  const Arch arch{pool.feature_dim(), hidden_dim, pool.num_classes()};
  return run_sgd(clips, protocol, init_model(arch, derive_seed(protocol.seed, kInitStream)));
}

TrainResult train_oracle(const SubjectPool& pool, const SplitManifest& manifest,
                         const ForgetSet& forget_set, const TrainProtocol& protocol,
                         int hidden_dim) {
  check_protocol(protocol);
  if (hidden_dim < 1)
    raise(ErrorCode::Param, "train_oracle: hidden_dim must be >= 1");

  const auto retained = retained_subjects(manifest, forget_set);
  const auto clips = collect_clips(pool, retained);
  if (clips.empty())
    raise(ErrorCode::Data, "train_oracle: retained split has no clips");

  const Arch arch{pool.feature_dim(), hidden_dim, pool.num_classes()};
  return run_sgd(clips, protocol, init_model(arch, derive_seed(protocol.seed, kInitStream)));
}

TrainResult finetune_naive(const ModelState& baseline, const SubjectPool& pool,
                           const SplitManifest& manifest, const ForgetSet& forget_set,
                           const TrainProtocol& short_protocol) {
  check_protocol(short_protocol);
  if (baseline.arch.d != pool.feature_dim() || baseline.arch.c != pool.num_classes())
    raise(ErrorCode::Arch, "finetune_naive: baseline arch disagrees with pool");

  const auto retained = retained_subjects(manifest, forget_set);
  const auto clips = collect_clips(pool, retained);
  if (clips.empty())
    raise(ErrorCode::Data, "finetune_naive: retained split has no clips");

  return run_sgd(clips, short_protocol, baseline);
}

}  // namespace sul
