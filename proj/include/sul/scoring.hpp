// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sul/dataset.hpp"
#include "sul/model.hpp"

namespace sul {

// Per-subject harmfulness proxy: mean per-clip cross-entropy under the
// trained baseline.
struct SubjectScore {
  std::string subject_id;
  double score = 0.0;
  int clip_count = 0;
};

// Top-K prefix of one ranking. Built only from the ranking, so sets for
// growing K are nested by construction.
struct ForgetSet {
  int k = 0;
  std::vector<std::string> subjects;  // rank order
  std::string source_ranking_hash;

  bool empty() const { return subjects.empty(); }
};

// The F = empty-set case used by oracle/naive comparisons and tests;
// build_forget_set itself rejects k = 0.
ForgetSet empty_forget_set();

// Scores every training subject, sorted by score descending, ties broken by
// ascending subject_id. Eval subjects are never touched.
std::vector<SubjectScore> score_subjects(const ModelState& baseline,
                                         const SubjectPool& pool,
                                         const SplitManifest& manifest);

std::string ranking_hash(const std::vector<SubjectScore>& ranking);

ForgetSet build_forget_set(const std::vector<SubjectScore>& ranking, int k);

std::string forget_set_hash(const ForgetSet& fs);

struct TrainPartition {
  std::vector<const ClipRecord*> retained;   // D_R
  std::vector<const ClipRecord*> forgotten;  // D_F
};

// Splits the training-pool clips into retained/forgotten by forget-set
// membership. Forget subjects outside the training split are rejected.
TrainPartition partition(const SubjectPool& pool, const SplitManifest& manifest,
                         const ForgetSet& fs);

// Ranking CSV: rank,subject_id,score,clip_count
void save_ranking_csv(const std::vector<SubjectScore>& ranking, const std::string& path);

}  // namespace sul
