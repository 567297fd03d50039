// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sul {

// Two-part classifier f(x) = head(backbone(x)):
//   backbone: a = tanh(W1^T x + b1)       (d -> h, parameters psi)
//   head:     p = softmax(W2^T a + b2)    (h -> C, parameters phi)
// The split exists so post-hoc updates can freeze the backbone and touch the
// head only.

struct BackboneParams {
  std::vector<double> w1;  // d*h, row-major [d][h]
  std::vector<double> b1;  // h

  bool operator==(const BackboneParams&) const = default;
};

struct HeadParams {
  std::vector<double> w2;  // h*C, row-major [h][C]
  std::vector<double> b2;  // C

  bool operator==(const HeadParams&) const = default;
};

struct Arch {
  int d = 0;  // feature dim
  int h = 0;  // hidden dim
  int c = 0;  // classes

  bool operator==(const Arch&) const = default;
};

struct ModelState {
  BackboneParams backbone;
  HeadParams head;
  Arch arch;

  bool operator==(const ModelState&) const = default;
};

struct PredictiveDistribution {
  std::vector<double> probs;  // length C, entries in (0,1], sum 1
};

struct Sample {
  std::span<const double> features;
  int label = 0;
};

using Batch = std::vector<Sample>;

struct HeadGrad {
  std::vector<double> w2;
  std::vector<double> b2;
};

struct FullGrad {
  std::vector<double> w1;
  std::vector<double> b1;
  HeadGrad head;
  double mean_loss = 0.0;  // mean cross-entropy over the batch
};

// Loss pieces of the composite head update, reported per minibatch pair.
struct ObjectiveComponents {
  double l_ret = 0.0;   // mean CE on the retained batch
  double l_cons = 0.0;  // mean KL(baseline || current) on the retained batch
  double l_forg = 0.0;  // mean CE on the forgotten batch
  double l_reg = 0.0;   // ||phi - phi0||^2
  double l_unl = 0.0;   // l_ret + lc*l_cons - lf*l_forg + lr*l_reg
};

struct CompositeWeights {
  double lambda_cons = 0.0;
  double lambda_forg = 0.0;
  double lambda_reg = 0.0;
};

// Probabilities are clamped at this floor before any log, keeping losses and
// the anti-fitting ascent finite.
inline constexpr double kProbFloor = 1e-12;

// Seeded uniform(-0.1, 0.1) initialization, draw order w1, b1, w2, b2.
ModelState init_model(Arch arch, std::uint64_t seed);

PredictiveDistribution forward(const ModelState& state, std::span<const double> features);

double cross_entropy(const PredictiveDistribution& pred, int label);

// KL(p || q) in nats; q is clamped at kProbFloor before the log.
double kl_divergence(const PredictiveDistribution& p, const PredictiveDistribution& q);

// Gradient of the batch-mean cross-entropy over all parameters.
FullGrad grad_full(const ModelState& state, const Batch& batch);

// Gradient over the head only of
//   L = L_ret + lambda_cons*L_cons - lambda_forg*L_forg + lambda_reg*||phi-phi0||^2
// with the backbone frozen at the baseline's (enforced; mismatch is an error).
// The backbone gradient is identically zero by construction and not returned.
HeadGrad grad_head_composite(const ModelState& state, const ModelState& baseline,
                             const Batch& batch_r, const Batch& batch_f,
                             const CompositeWeights& weights);

// The scalar pieces of the same objective, for traces and tests.
ObjectiveComponents objective_components(const ModelState& state, const ModelState& baseline,
                                         const Batch& batch_r, const Batch& batch_f,
                                         const CompositeWeights& weights);

}  // namespace sul
