// SPDX-License-Identifier: Apache-2.0
#include "sul/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sul/error.hpp"
#include "sul/rng.hpp"

namespace sul {

namespace {

void check_state(const ModelState& state) {
  const auto& [d, h, c] = state.arch;
  if (d < 1 || h < 1 || c < 2)
    raise(ErrorCode::Arch, "model arch must have d>=1, h>=1, C>=2");
  if (state.backbone.w1.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(h) ||
      state.backbone.b1.size() != static_cast<std::size_t>(h) ||
      state.head.w2.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(c) ||
      state.head.b2.size() != static_cast<std::size_t>(c))
    raise(ErrorCode::Arch, "model parameter shapes disagree with arch");
}

// a = tanh(W1^T x + b1)
void hidden_activation(const ModelState& state, std::span<const double> x,
                       std::vector<double>& a) {
  const int d = state.arch.d, h = state.arch.h;
  a.assign(static_cast<std::size_t>(h), 0.0);
  for (int i = 0; i < d; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    const double* w_row = state.backbone.w1.data() + static_cast<std::size_t>(i) * h;
    for (int j = 0; j < h; ++j) a[static_cast<std::size_t>(j)] += w_row[j] * xi;
  }
  for (int j = 0; j < h; ++j)
    a[static_cast<std::size_t>(j)] = std::tanh(a[static_cast<std::size_t>(j)] +
                                               state.backbone.b1[static_cast<std::size_t>(j)]);
}

// p = softmax(W2^T a + b2), stabilized by max-subtraction.
void head_probs(const ModelState& state, const std::vector<double>& a,
                std::vector<double>& p) {
  const int h = state.arch.h, c = state.arch.c;
  p.assign(static_cast<std::size_t>(c), 0.0);
  for (int k = 0; k < c; ++k) p[static_cast<std::size_t>(k)] = state.head.b2[static_cast<std::size_t>(k)];
  for (int j = 0; j < h; ++j) {
    const double aj = a[static_cast<std::size_t>(j)];
    const double* w_row = state.head.w2.data() + static_cast<std::size_t>(j) * c;
    for (int k = 0; k < c; ++k) p[static_cast<std::size_t>(k)] += w_row[k] * aj;
  }
  const double zmax = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& z : p) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (double& z : p) z /= sum;
}

void check_batch(const ModelState& state, const Batch& batch, const char* name) {
  if (batch.empty())
    raise(ErrorCode::Param, std::string(name) + " batch is empty");
  for (const Sample& s : batch) {
    if (static_cast<int>(s.features.size()) != state.arch.d)
      raise(ErrorCode::Arch, std::string(name) + " batch: feature length != d");
    if (s.label < 0 || s.label >= state.arch.c)
      raise(ErrorCode::Param, std::string(name) + " batch: label out of range");
  }
}

}  // namespace

ModelState init_model(Arch arch, std::uint64_t seed) {
  if (arch.d < 1 || arch.h < 1 || arch.c < 2)
    raise(ErrorCode::Param, "init_model: need d>=1, h>=1, C>=2");
  ModelState state;
  state.arch = arch;
  state.backbone.w1.resize(static_cast<std::size_t>(arch.d) * arch.h);
  state.backbone.b1.resize(static_cast<std::size_t>(arch.h));
  state.head.w2.resize(static_cast<std::size_t>(arch.h) * arch.c);
  state.head.b2.resize(static_cast<std::size_t>(arch.c));
  Rng rng(seed);
  for (double& v : state.backbone.w1) v = rng.uniform(-0.1, 0.1);
  for (double& v : state.backbone.b1) v = rng.uniform(-0.1, 0.1);
  for (double& v : state.head.w2) v = rng.uniform(-0.1, 0.1);
  for (double& v : state.head.b2) v = rng.uniform(-0.1, 0.1);
  return state;
}

PredictiveDistribution forward(const ModelState& state, std::span<const double> features) {
  check_state(state);
  if (static_cast<int>(features.size()) != state.arch.d)
    raise(ErrorCode::Arch, "forward: feature length != d");
  for (double f : features)
    if (!std::isfinite(f))
      raise(ErrorCode::Data, "forward: non-finite feature");
  std::vector<double> a;
  hidden_activation(state, features, a);
  PredictiveDistribution out;
  head_probs(state, a, out.probs);
  return out;
}

double cross_entropy(const PredictiveDistribution& pred, int label) {
  if (label < 0 || label >= static_cast<int>(pred.probs.size()))
    raise(ErrorCode::Param, "cross_entropy: label out of range");
  return -std::log(std::max(pred.probs[static_cast<std::size_t>(label)], kProbFloor));
}

double kl_divergence(const PredictiveDistribution& p, const PredictiveDistribution& q) {
  if (p.probs.size() != q.probs.size())
    raise(ErrorCode::Arch, "kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    const double pi = p.probs[i];
    if (pi <= 0.0) continue;  // 0 log 0 -> 0
    kl += pi * (std::log(pi) - std::log(std::max(q.probs[i], kProbFloor)));
  }
  return std::max(kl, 0.0);
}

FullGrad grad_full(const ModelState& state, const Batch& batch) {
  check_state(state);
  check_batch(state, batch, "grad_full");
  const int d = state.arch.d, h = state.arch.h, c = state.arch.c;

  FullGrad g;
  g.w1.assign(state.backbone.w1.size(), 0.0);
  g.b1.assign(state.backbone.b1.size(), 0.0);
  g.head.w2.assign(state.head.w2.size(), 0.0);
  g.head.b2.assign(state.head.b2.size(), 0.0);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> a, p, dz(static_cast<std::size_t>(c)), da(static_cast<std::size_t>(h));
  for (const Sample& s : batch) {
    hidden_activation(state, s.features, a);
    head_probs(state, a, p);
    g.mean_loss += -std::log(std::max(p[static_cast<std::size_t>(s.label)], kProbFloor)) * inv_n;

    // softmax-CE: dL/dz = p - onehot(y)
    for (int k = 0; k < c; ++k) dz[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] * inv_n;
    dz[static_cast<std::size_t>(s.label)] -= inv_n;

    for (int j = 0; j < h; ++j) {
      const double aj = a[static_cast<std::size_t>(j)];
      double* gw_row = g.head.w2.data() + static_cast<std::size_t>(j) * c;
      const double* w_row = state.head.w2.data() + static_cast<std::size_t>(j) * c;
      double acc = 0.0;
      for (int k = 0; k < c; ++k) {
        gw_row[k] += aj * dz[static_cast<std::size_t>(k)];
        acc += w_row[k] * dz[static_cast<std::size_t>(k)];
      }
      // through tanh: da/dz1 = 1 - a^2
      da[static_cast<std::size_t>(j)] = acc * (1.0 - aj * aj);
    }
    for (int k = 0; k < c; ++k) g.head.b2[static_cast<std::size_t>(k)] += dz[static_cast<std::size_t>(k)];

    for (int i = 0; i < d; ++i) {
      const double xi = s.features[static_cast<std::size_t>(i)];
      double* gw_row = g.w1.data() + static_cast<std::size_t>(i) * h;
      for (int j = 0; j < h; ++j) gw_row[j] += xi * da[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < h; ++j) g.b1[static_cast<std::size_t>(j)] += da[static_cast<std::size_t>(j)];
  }
  return g;
}

HeadGrad grad_head_composite(const ModelState& state, const ModelState& baseline,
                             const Batch& batch_r, const Batch& batch_f,
                             const CompositeWeights& weights) {
  check_state(state);
  check_state(baseline);
  if (state.arch != baseline.arch)
    raise(ErrorCode::Arch, "grad_head_composite: arch mismatch with baseline");
  if (!(state.backbone == baseline.backbone))
    raise(ErrorCode::Freeze, "grad_head_composite: backbone differs from baseline");
  check_batch(state, batch_r, "retained");
  check_batch(state, batch_f, "forgotten");

  const int h = state.arch.h, c = state.arch.c;
  HeadGrad g;
  g.w2.assign(state.head.w2.size(), 0.0);
  g.b2.assign(state.head.b2.size(), 0.0);

  std::vector<double> a, p, p0, dz(static_cast<std::size_t>(c));
  auto accumulate = [&](const std::vector<double>& act, const std::vector<double>& dlogits) {
    for (int j = 0; j < h; ++j) {
      const double aj = act[static_cast<std::size_t>(j)];
      double* gw_row = g.w2.data() + static_cast<std::size_t>(j) * c;
      for (int k = 0; k < c; ++k) gw_row[k] += aj * dlogits[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < c; ++k) g.b2[static_cast<std::size_t>(k)] += dlogits[static_cast<std::size_t>(k)];
  };

  // Retained batch: CE plus consistency. With the backbone shared, the hidden
  // activation is the same for the current and baseline heads.
  const double inv_r = 1.0 / static_cast<double>(batch_r.size());
  for (const Sample& s : batch_r) {
    hidden_activation(state, s.features, a);
    head_probs(state, a, p);
    for (int k = 0; k < c; ++k) dz[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] * inv_r;
    dz[static_cast<std::size_t>(s.label)] -= inv_r;
    if (weights.lambda_cons != 0.0) {
      head_probs(baseline, a, p0);
      // d KL(p0 || p) / dz = p - p0
      for (int k = 0; k < c; ++k)
        dz[static_cast<std::size_t>(k)] += weights.lambda_cons * inv_r *
                                           (p[static_cast<std::size_t>(k)] - p0[static_cast<std::size_t>(k)]);
    }
    accumulate(a, dz);
  }

  // Forgotten batch: CE entering with a negative sign (anti-fitting).
  const double scale_f = -weights.lambda_forg / static_cast<double>(batch_f.size());
  if (weights.lambda_forg != 0.0) {
    for (const Sample& s : batch_f) {
      hidden_activation(state, s.features, a);
      head_probs(state, a, p);
      for (int k = 0; k < c; ++k) dz[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k)] * scale_f;
      dz[static_cast<std::size_t>(s.label)] -= scale_f;
      accumulate(a, dz);
    }
  }

  // Pull toward the baseline head: d/dphi lr*||phi - phi0||^2 = 2 lr (phi - phi0).
  if (weights.lambda_reg != 0.0) {
    const double two_lr = 2.0 * weights.lambda_reg;
    for (std::size_t i = 0; i < g.w2.size(); ++i)
      g.w2[i] += two_lr * (state.head.w2[i] - baseline.head.w2[i]);
    for (std::size_t i = 0; i < g.b2.size(); ++i)
      g.b2[i] += two_lr * (state.head.b2[i] - baseline.head.b2[i]);
  }
  return g;
}

ObjectiveComponents objective_components(const ModelState& state, const ModelState& baseline,
                                         const Batch& batch_r, const Batch& batch_f,
                                         const CompositeWeights& weights) {
  check_state(state);
  check_state(baseline);
  if (state.arch != baseline.arch)
    raise(ErrorCode::Arch, "objective_components: arch mismatch with baseline");
  if (!(state.backbone == baseline.backbone))
    raise(ErrorCode::Freeze, "objective_components: backbone differs from baseline");
  check_batch(state, batch_r, "retained");
  check_batch(state, batch_f, "forgotten");

  ObjectiveComponents out;
  std::vector<double> a;
  PredictiveDistribution p, p0;
  for (const Sample& s : batch_r) {
    hidden_activation(state, s.features, a);
    head_probs(state, a, p.probs);
    head_probs(baseline, a, p0.probs);
    out.l_ret += cross_entropy(p, s.label);
    out.l_cons += kl_divergence(p0, p);
  }
  out.l_ret /= static_cast<double>(batch_r.size());
  out.l_cons /= static_cast<double>(batch_r.size());

  for (const Sample& s : batch_f) {
    hidden_activation(state, s.features, a);
    head_probs(state, a, p.probs);
    out.l_forg += cross_entropy(p, s.label);
  }
  out.l_forg /= static_cast<double>(batch_f.size());

  for (std::size_t i = 0; i < state.head.w2.size(); ++i) {
    const double dv = state.head.w2[i] - baseline.head.w2[i];
    out.l_reg += dv * dv;
  }
  for (std::size_t i = 0; i < state.head.b2.size(); ++i) {
    const double dv = state.head.b2[i] - baseline.head.b2[i];
    out.l_reg += dv * dv;
  }

  out.l_unl = out.l_ret + weights.lambda_cons * out.l_cons -
              weights.lambda_forg * out.l_forg + weights.lambda_reg * out.l_reg;
  return out;
}

}  // namespace sul
