// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sul/dataset.hpp"
#include "sul/model.hpp"
#include "sul/scoring.hpp"

namespace sul {

enum class Selection {
  FinalEpoch,
  BestTrainLoss,
};

struct TrainProtocol {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  Selection selection = Selection::FinalEpoch;
};

struct ComputeLedger {
  std::uint64_t gradient_steps = 0;
  std::uint64_t clips_processed = 0;
  double wall_seconds = 0.0;  // informational only, never asserted on
};

struct TrainResult {
  ModelState model;
  ComputeLedger ledger;
};

// Views clips as model samples; pointers must outlive the batch.
Batch to_batch(const std::vector<const ClipRecord*>& clips);

// Plain minibatch SGD from a fresh seeded init over all training-split clips.
// One seeded permutation per epoch, epochs * ceil(N/batch) steps.
TrainResult train_baseline(const SubjectPool& pool, const SplitManifest& manifest,
                           const TrainProtocol& protocol, int hidden_dim);

// Same procedure from a fresh init, with every forget-set subject's clips
// removed before training begins. Never warm-started.
TrainResult train_oracle(const SubjectPool& pool, const SplitManifest& manifest,
                         const ForgetSet& forget_set, const TrainProtocol& protocol,
                         int hidden_dim);

// Comparator: continue from the baseline checkpoint and finetune ALL
// parameters with plain CE on retained clips only. The ledger covers just
// this post-hoc stage.
TrainResult finetune_naive(const ModelState& baseline, const SubjectPool& pool,
                           const SplitManifest& manifest, const ForgetSet& forget_set,
                           const TrainProtocol& short_protocol);

}  // namespace sul
