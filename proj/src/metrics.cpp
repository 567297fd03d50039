// SPDX-License-Identifier: Apache-2.0
#include "sul/metrics.hpp"

#include <cmath>

#include "sul/error.hpp"

namespace sul {

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::Eval: return "eval";
    case SplitTag::TrainRetained: return "train_retained";
    case SplitTag::TrainForgotten: return "train_forgotten";
  }
  return "unknown";
}

EvalReport evaluate(const ModelState& model, const std::vector<const ClipRecord*>& clips,
                    SplitTag split_tag) {
  if (clips.empty())
    raise(ErrorCode::Param, "evaluate: clip set is empty");

  const int c = model.arch.c;
  EvalReport report;
  report.split_tag = split_tag;
  report.num_classes = c;
  report.confusion.assign(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0);

  std::uint64_t correct = 0;
  for (const ClipRecord* clip : clips) {
    const PredictiveDistribution pred = forward(model, clip->features);
    int argmax = 0;
    for (int k = 1; k < c; ++k)
      if (pred.probs[static_cast<std::size_t>(k)] > pred.probs[static_cast<std::size_t>(argmax)])
        argmax = k;
    if (clip->label < 0 || clip->label >= c)
      raise(ErrorCode::Data, "evaluate: clip " + clip->clip_id + " label out of range");
    report.confusion[static_cast<std::size_t>(clip->label) * c + argmax] += 1;
    if (argmax == clip->label) ++correct;
  }
  report.total = clips.size();
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);
  return report;
}

OgrRecord ogr(double m_b, double m_u, double m_o) {
  OgrRecord rec;
  rec.m_b = m_b;
  rec.m_u = m_u;
  rec.m_o = m_o;
  rec.delta_oracle = m_o - m_b;
  rec.delta_res = m_o - m_u;
  if (m_o > m_b) rec.ogr = (m_u - m_b) / (m_o - m_b);
  return rec;
}

std::vector<MarginalGain> marginal_gains(const std::vector<std::pair<int, OgrRecord>>& records) {
  if (records.size() < 2)
    raise(ErrorCode::Param, "marginal_gains: need >= 2 records");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].first <= records[i - 1].first)
      raise(ErrorCode::Param, "marginal_gains: K values must be strictly increasing");

  std::vector<MarginalGain> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const OgrRecord& rec = records[i].second;
    MarginalGain g;
    g.k = records[i].first;
    g.delta_oracle = rec.delta_oracle;
    g.delta_unl = rec.m_u - rec.m_b;
    if (i > 0) {
      const OgrRecord& prev = records[i - 1].second;
      g.marginal_oracle = g.delta_oracle - prev.delta_oracle;
      g.marginal_unl = g.delta_unl - (prev.m_u - prev.m_b);
    }
    out.push_back(g);
  }
  return out;
}

double relative_compute(const ComputeLedger& stage, const ComputeLedger& baseline) {
  if (baseline.gradient_steps == 0)
    raise(ErrorCode::Param, "relative_compute: baseline ledger has zero steps");
  return static_cast<double>(stage.gradient_steps) /
         static_cast<double>(baseline.gradient_steps);
}

}  // namespace sul
