// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sul/dataset.hpp"
#include "sul/model.hpp"
#include "sul/trainer.hpp"

namespace sul {

enum class SplitTag {
  Eval,
  TrainRetained,
  TrainForgotten,
};

const char* split_tag_name(SplitTag tag);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::uint64_t> confusion;  // C*C row-major, [label][predicted]
  int num_classes = 0;
  std::uint64_t total = 0;
  SplitTag split_tag = SplitTag::Eval;
};

// Baseline/unlearned/oracle triple summarized against the oracle reference.
// `ogr` is defined only when the oracle actually improves on the baseline
// (m_o > m_b); otherwise the removal scenario was not beneficial and the
// ratio carries no meaning.
struct OgrRecord {
  double m_b = 0.0;
  double m_u = 0.0;
  double m_o = 0.0;
  double delta_oracle = 0.0;  // m_o - m_b
  double delta_res = 0.0;     // m_o - m_u
  std::optional<double> ogr;  // (m_u - m_b) / (m_o - m_b) when defined
};

struct MarginalGain {
  int k = 0;
  double delta_oracle = 0.0;
  double delta_unl = 0.0;
  std::optional<double> marginal_oracle;  // vs previous K; absent on the first
  std::optional<double> marginal_unl;
};

// Argmax predictions (ties to the lowest class index), confusion matrix and
// accuracy against the clips' observed labels.
EvalReport evaluate(const ModelState& model, const std::vector<const ClipRecord*>& clips,
                    SplitTag split_tag);

OgrRecord ogr(double m_b, double m_u, double m_o);

// Per-K marginal gains over one nested sweep. Inputs must be sorted by
// strictly increasing K and share the baseline metric.
std::vector<MarginalGain> marginal_gains(const std::vector<std::pair<int, OgrRecord>>& records);

// Stage gradient steps normalized by the full baseline run.
double relative_compute(const ComputeLedger& stage, const ComputeLedger& baseline);

}  // namespace sul
