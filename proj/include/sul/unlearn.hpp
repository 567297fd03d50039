// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sul/dataset.hpp"
#include "sul/model.hpp"
#include "sul/rng.hpp"
#include "sul/trainer.hpp"

namespace sul {

struct UnlearnConfig {
  double lambda_cons = 1.0;
  double lambda_forg = 0.5;
  double lambda_reg = 0.01;
  std::uint64_t steps = 0;
  double learning_rate = 0.05;
  int batch_r = 32;
  int batch_f = 32;
  std::uint64_t seed = 0;
};

// The composite head gradient is rescaled to this L2 norm when it exceeds it;
// the anti-fitting term is an unbounded ascent direction otherwise.
inline constexpr double kGradClipNorm = 10.0;

// Stream tags: the retained and forgotten minibatch streams consume
// independent rng streams derived from UnlearnConfig::seed with these tags.
inline constexpr std::uint64_t kRetainedStream = 0x52;
inline constexpr std::uint64_t kForgottenStream = 0x46;

// Cycling minibatch index stream: one seeded shuffle per pass, reshuffled on
// wraparound. Batches always have exactly batch_size entries (indices repeat
// within a batch only when batch_size exceeds the stream length).
class BatchStream {
 public:
  BatchStream(std::size_t n, int batch_size, std::uint64_t seed);

  const std::vector<std::size_t>& next();

 private:
  std::vector<std::size_t> order_;
  std::vector<std::size_t> batch_;
  std::size_t pos_ = 0;
  int batch_size_;
  Rng rng_;
};

struct UnlearnResult {
  ModelState model;  // updated head over the baseline's backbone
  ComputeLedger ledger;
  std::vector<ObjectiveComponents> trace;  // one entry per step, pre-update
};

// Head-only composite update from the baseline: per step, one minibatch from
// each stream, grad_head_composite, norm clip, SGD on the head. The backbone
// is carried over untouched.
UnlearnResult run_unlearning(const ModelState& baseline,
                             const std::vector<const ClipRecord*>& d_r,
                             const std::vector<const ClipRecord*>& d_f,
                             const UnlearnConfig& config);

// Mean CE of `updated` on the forgotten clips minus mean CE of `baseline`
// there. Positive = stronger anti-fitting.
double forgetting_strength(const ModelState& baseline, const ModelState& updated,
                           const std::vector<const ClipRecord*>& d_f);

// Trace CSV: step,l_ret,l_cons,l_forg,l_reg,l_unl
void save_trace_csv(const std::vector<ObjectiveComponents>& trace, const std::string& path);

}  // namespace sul
