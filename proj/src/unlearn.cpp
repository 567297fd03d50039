// SPDX-License-Identifier: Apache-2.0
#include "sul/unlearn.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "sul/error.hpp"

namespace sul {

BatchStream::BatchStream(std::size_t n, int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
  if (n == 0)
    raise(ErrorCode::Param, "BatchStream: empty stream");
  if (batch_size < 1)
    raise(ErrorCode::Param, "BatchStream: batch_size must be >= 1");
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  rng_.shuffle(order_);
}

const std::vector<std::size_t>& BatchStream::next() {
  batch_.clear();
  while (batch_.size() < static_cast<std::size_t>(batch_size_)) {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    batch_.push_back(order_[pos_++]);
  }
  return batch_;
}

UnlearnResult run_unlearning(const ModelState& baseline,
                             const std::vector<const ClipRecord*>& d_r,
                             const std::vector<const ClipRecord*>& d_f,
                             const UnlearnConfig& config) {
  if (d_r.empty())
    raise(ErrorCode::Param, "run_unlearning: retained clip set is empty");
  if (d_f.empty())
    raise(ErrorCode::Param, "run_unlearning: forgotten clip set is empty (nothing to forget)");
  if (config.lambda_cons < 0.0 || config.lambda_forg < 0.0 || config.lambda_reg < 0.0)
    raise(ErrorCode::Param, "run_unlearning: lambda weights must be >= 0");
  if (!(config.learning_rate > 0.0))
    raise(ErrorCode::Param, "run_unlearning: learning_rate must be positive");
  if (config.batch_r < 1 || config.batch_f < 1)
    raise(ErrorCode::Param, "run_unlearning: batch sizes must be >= 1");
  {
    std::set<std::string> retained_ids;
    for (const ClipRecord* clip : d_r) retained_ids.insert(clip->clip_id);
    for (const ClipRecord* clip : d_f)
      if (retained_ids.count(clip->clip_id))
        raise(ErrorCode::Partition, "run_unlearning: clip " + clip->clip_id +
                                        " appears in both streams");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Batch all_r = to_batch(d_r);
  const Batch all_f = to_batch(d_f);
  const CompositeWeights weights{config.lambda_cons, config.lambda_forg, config.lambda_reg};

  BatchStream stream_r(all_r.size(), config.batch_r, derive_seed(config.seed, kRetainedStream));
  BatchStream stream_f(all_f.size(), config.batch_f, derive_seed(config.seed, kForgottenStream));

  UnlearnResult result;
  result.model = baseline;
  result.trace.reserve(config.steps);

  Batch batch_r, batch_f;
  for (std::uint64_t step = 0; step < config.steps; ++step) {
    batch_r.clear();
    for (std::size_t i : stream_r.next()) batch_r.push_back(all_r[i]);
    batch_f.clear();
    for (std::size_t i : stream_f.next()) batch_f.push_back(all_f[i]);

    result.trace.push_back(
        objective_components(result.model, baseline, batch_r, batch_f, weights));

    HeadGrad grad = grad_head_composite(result.model, baseline, batch_r, batch_f, weights);
    double sq = 0.0;
    for (double g : grad.w2) sq += g * g;
    for (double g : grad.b2) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > kGradClipNorm) {
      const double scale = kGradClipNorm / norm;
      for (double& g : grad.w2) g *= scale;
      for (double& g : grad.b2) g *= scale;
    }
    for (std::size_t i = 0; i < grad.w2.size(); ++i)
      result.model.head.w2[i] -= config.learning_rate * grad.w2[i];
    for (std::size_t i = 0; i < grad.b2.size(); ++i)
      result.model.head.b2[i] -= config.learning_rate * grad.b2[i];

    result.ledger.gradient_steps += 1;
    result.ledger.clips_processed +=
        static_cast<std::uint64_t>(config.batch_r) + static_cast<std::uint64_t>(config.batch_f);
  }
  result.ledger.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double forgetting_strength(const ModelState& baseline, const ModelState& updated,
                           const std::vector<const ClipRecord*>& d_f) {
  if (d_f.empty())
    raise(ErrorCode::Param, "forgetting_strength: forgotten clip set is empty");
  double before = 0.0, after = 0.0;
  for (const ClipRecord* clip : d_f) {
    before += cross_entropy(forward(baseline, clip->features), clip->label);
    after += cross_entropy(forward(updated, clip->features), clip->label);
  }
  const double n = static_cast<double>(d_f.size());
  return after / n - before / n;
}

void save_trace_csv(const std::vector<ObjectiveComponents>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    raise(ErrorCode::Io, "cannot write " + path);
  out << "step,l_ret,l_cons,l_forg,l_reg,l_unl\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const ObjectiveComponents& c = trace[i];
    out << i << "," << fmt(c.l_ret) << "," << fmt(c.l_cons) << "," << fmt(c.l_forg) << ","
        << fmt(c.l_reg) << "," << fmt(c.l_unl) << "\n";
  }
  if (!out)
    raise(ErrorCode::Io, "write failed for " + path);
}

}  // namespace sul
