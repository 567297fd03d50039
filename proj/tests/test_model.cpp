// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sul/error.hpp"
#include "sul/model.hpp"
#include "sul/rng.hpp"

using namespace sul;

namespace {

// Finite-difference oracle: central differences of a scalar objective over a
// flat parameter view, independent of the backprop path under test.
struct ParamRef {
  std::vector<double>* array;
  std::size_t index;
};

std::vector<ParamRef> full_params(ModelState& state) {
  std::vector<ParamRef> refs;
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2, &state.head.b2})
    for (std::size_t i = 0; i < arr->size(); ++i) refs.push_back({arr, i});
  return refs;
}

std::vector<ParamRef> head_params(ModelState& state) {
  std::vector<ParamRef> refs;
  for (auto* arr : {&state.head.w2, &state.head.b2})
    for (std::size_t i = 0; i < arr->size(); ++i) refs.push_back({arr, i});
  return refs;
}

template <typename Objective>
std::vector<double> central_differences(std::vector<ParamRef>& refs, Objective objective,
                                        double eps) {
  std::vector<double> grad(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    double& p = (*refs[i].array)[refs[i].index];
    const double saved = p;
    p = saved + eps;
    const double up = objective();
    p = saved - eps;
    const double down = objective();
    p = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (scale < 1e-8) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

ModelState random_state(Rng& rng, int d, int h, int c) {
  ModelState state = init_model({d, h, c}, rng.next_u64());
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2, &state.head.b2})
    for (double& v : *arr) v = rng.uniform(-1.0, 1.0);
  return state;
}

Batch random_batch(Rng& rng, std::vector<std::vector<double>>& storage, int n, int d, int c) {
  storage.clear();
  Batch batch;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(static_cast<std::size_t>(d));
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    storage.push_back(std::move(x));
  }
  for (int i = 0; i < n; ++i)
    batch.push_back({std::span<const double>(storage[static_cast<std::size_t>(i)]),
                     static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(c)))});
  return batch;
}

}  // namespace

TEST_CASE("forward with zero parameters is uniform") {
  ModelState state = init_model({3, 4, 5}, 1);
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2, &state.head.b2})
    for (double& v : *arr) v = 0.0;
  const std::vector<double> x{0.3, -1.0, 2.0};
  const auto pred = forward(state, x);
  for (double p : pred.probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("equal logits split a two-class head evenly") {
  ModelState state = init_model({2, 3, 2}, 4);
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2})
    for (double& v : *arr) v = 0.0;
  for (const double z : {-7.5, 0.0, 3.25, 41.0}) {
    state.head.b2 = {z, z};
    const auto pred = forward(state, std::vector<double>{1.0, -2.0});
    CHECK(pred.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pred.probs[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("softmax is invariant to a constant logit shift") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    ModelState state = random_state(rng, 3, 4, 3);
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto before = forward(state, x);
    const double shift = rng.uniform(-30.0, 30.0);
    for (double& b : state.head.b2) b += shift;
    const auto after = forward(state, x);
    for (std::size_t i = 0; i < before.probs.size(); ++i)
      CHECK(after.probs[i] == doctest::Approx(before.probs[i]).epsilon(1e-9));
  }
}

TEST_CASE("forward matches a straight-line recomputation") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(5));
    const int h = 1 + static_cast<int>(rng.uniform_int(5));
    const int c = 2 + static_cast<int>(rng.uniform_int(3));
    ModelState state = random_state(rng, d, h, c);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (double& v : x) v = rng.uniform(-2, 2);

    const auto pred = forward(state, x);
    double sum = 0.0;
    for (double p : pred.probs) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    // independent re-evaluation of softmax(W2^T tanh(W1^T x + b1) + b2)
    std::vector<double> a(static_cast<std::size_t>(h), 0.0);
    for (int j = 0; j < h; ++j) {
      double z = state.backbone.b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < d; ++i)
        z += state.backbone.w1[static_cast<std::size_t>(i) * h + j] * x[static_cast<std::size_t>(i)];
      a[static_cast<std::size_t>(j)] = std::tanh(z);
    }
    std::vector<double> logits(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
      double z = state.head.b2[static_cast<std::size_t>(k)];
      for (int j = 0; j < h; ++j)
        z += state.head.w2[static_cast<std::size_t>(j) * c + k] * a[static_cast<std::size_t>(j)];
      logits[static_cast<std::size_t>(k)] = z;
    }
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z);
    for (int k = 0; k < c; ++k)
      CHECK(pred.probs[static_cast<std::size_t>(k)] ==
            doctest::Approx(std::exp(logits[static_cast<std::size_t>(k)]) / denom).epsilon(1e-9));
  }
}

TEST_CASE("cross_entropy handles analytic cases") {
  PredictiveDistribution perfect{{1.0, 0.0}};
  CHECK(cross_entropy(perfect, 0) == doctest::Approx(0.0));
  PredictiveDistribution uniform{{0.25, 0.25, 0.25, 0.25}};
  CHECK(cross_entropy(uniform, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  PredictiveDistribution p{{0.7, 0.3}};
  CHECK(cross_entropy(p, 1) == doctest::Approx(-std::log(0.3)).epsilon(1e-12));
  CHECK(cross_entropy(p, 1) == doctest::Approx(1.2039728).epsilon(1e-6));
  CHECK_THROWS_AS(cross_entropy(p, 2), Error);
  CHECK_THROWS_AS(cross_entropy(p, -1), Error);
}

TEST_CASE("kl_divergence identities and hand value") {
  PredictiveDistribution p{{0.4, 0.6}};
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
  PredictiveDistribution onehot{{1.0, 0.0}};
  PredictiveDistribution half{{0.5, 0.5}};
  CHECK(kl_divergence(onehot, half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(kl_divergence(p, PredictiveDistribution{{1.0, 0.0, 0.0}}), Error);

  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const int c = 2 + static_cast<int>(rng.uniform_int(4));
    PredictiveDistribution a, b;
    double sa = 0, sb = 0;
    for (int i = 0; i < c; ++i) {
      a.probs.push_back(rng.uniform() + 1e-6);
      b.probs.push_back(rng.uniform() + 1e-6);
      sa += a.probs.back();
      sb += b.probs.back();
    }
    for (double& v : a.probs) v /= sa;
    for (double& v : b.probs) v /= sb;
    CHECK(kl_divergence(a, b) >= 0.0);
  }
}

TEST_CASE("grad_full vanishes when the model is already right") {
  Rng rng(13);
  ModelState state = random_state(rng, 3, 4, 3);
  std::vector<std::vector<double>> storage;
  Batch batch = random_batch(rng, storage, 4, 3, 3);
  // crank the head so every prediction saturates at its argmax, then label
  // the batch with exactly those argmax classes
  for (double& v : state.head.w2) v *= 200.0;
  for (double& v : state.head.b2) v *= 200.0;
  for (auto& sample : batch) {
    const auto pred = forward(state, sample.features);
    int argmax = 0;
    for (std::size_t k = 1; k < pred.probs.size(); ++k)
      if (pred.probs[k] > pred.probs[static_cast<std::size_t>(argmax)])
        argmax = static_cast<int>(k);
    sample.label = argmax;
  }
  const FullGrad grad = grad_full(state, batch);
  for (const auto* arr : {&grad.w1, &grad.b1, &grad.head.w2, &grad.head.b2})
    for (double g : *arr) CHECK(std::abs(g) <= 1e-9);
}

TEST_CASE("grad_full matches central finite differences") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(8));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int c = 2 + static_cast<int>(rng.uniform_int(3));
    ModelState state = random_state(rng, d, h, c);
    std::vector<std::vector<double>> storage;
    const Batch batch = random_batch(rng, storage, 1 + static_cast<int>(rng.uniform_int(6)), d, c);

    const FullGrad grad = grad_full(state, batch);
    std::vector<double> flat;
    for (const auto* arr : {&grad.w1, &grad.b1, &grad.head.w2, &grad.head.b2})
      flat.insert(flat.end(), arr->begin(), arr->end());

    auto refs = full_params(state);
    const auto fd = central_differences(refs, [&] { return grad_full(state, batch).mean_loss; }, 1e-5);
    CHECK(max_rel_error(flat, fd) <= 1e-5);
  }
}

TEST_CASE("grad_full is invariant to batch duplication") {
  Rng rng(19);
  ModelState state = random_state(rng, 4, 3, 3);
  std::vector<std::vector<double>> storage;
  Batch batch = random_batch(rng, storage, 5, 4, 3);
  Batch doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const FullGrad a = grad_full(state, batch);
  const FullGrad b = grad_full(state, doubled);
  CHECK(max_rel_error(a.w1, b.w1) <= 1e-12);
  CHECK(max_rel_error(a.head.w2, b.head.w2) <= 1e-12);
  CHECK(a.mean_loss == doctest::Approx(b.mean_loss).epsilon(1e-12));
  CHECK_THROWS_AS(grad_full(state, Batch{}), Error);
}

TEST_CASE("grad_head_composite with zero weights reduces to retained CE") {
  Rng rng(23);
  ModelState baseline = random_state(rng, 4, 5, 3);
  std::vector<std::vector<double>> s1, s2;
  const Batch batch_r = random_batch(rng, s1, 6, 4, 3);
  const Batch batch_f = random_batch(rng, s2, 3, 4, 3);
  const HeadGrad composite =
      grad_head_composite(baseline, baseline, batch_r, batch_f, {0.0, 0.0, 0.0});
  const FullGrad ce = grad_full(baseline, batch_r);
  CHECK(max_rel_error(composite.w2, ce.head.w2) <= 1e-12);
  CHECK(max_rel_error(composite.b2, ce.head.b2) <= 1e-12);
}

TEST_CASE("objective components at the baseline state") {
  Rng rng(29);
  ModelState baseline = random_state(rng, 3, 4, 4);
  std::vector<std::vector<double>> s1, s2;
  const Batch batch_r = random_batch(rng, s1, 5, 3, 4);
  const Batch batch_f = random_batch(rng, s2, 4, 3, 4);
  const auto comp = objective_components(baseline, baseline, batch_r, batch_f, {1.0, 0.5, 0.01});
  CHECK(std::abs(comp.l_cons) <= 1e-12);
  CHECK(std::abs(comp.l_reg) <= 1e-12);
}

TEST_CASE("objective combination and term identities") {
  Rng rng(31);
  ModelState baseline = random_state(rng, 3, 4, 3);
  ModelState state = baseline;
  for (double& v : state.head.w2) v += rng.uniform(-0.3, 0.3);
  std::vector<std::vector<double>> s1, s2;
  const Batch batch_r = random_batch(rng, s1, 4, 3, 3);
  const Batch batch_f = random_batch(rng, s2, 2, 3, 3);

  const auto ones = objective_components(state, baseline, batch_r, batch_f, {1.0, 1.0, 1.0});
  CHECK(ones.l_unl ==
        doctest::Approx(ones.l_ret + ones.l_cons - ones.l_forg + ones.l_reg).epsilon(1e-12));

  // single-clip batches reduce to plain cross-entropy
  const Batch one_r{batch_r[0]};
  const Batch one_f{batch_f[0]};
  const auto single = objective_components(state, baseline, one_r, one_f, {1.0, 1.0, 1.0});
  CHECK(single.l_ret ==
        doctest::Approx(cross_entropy(forward(state, one_r[0].features), one_r[0].label))
            .epsilon(1e-12));
  CHECK(single.l_forg ==
        doctest::Approx(cross_entropy(forward(state, one_f[0].features), one_f[0].label))
            .epsilon(1e-12));

  // doubling lambda_forg at a fixed state moves the objective by -a * L_forg
  const double a = 0.7;
  const auto at_a = objective_components(state, baseline, batch_r, batch_f, {1.0, a, 0.01});
  const auto at_2a = objective_components(state, baseline, batch_r, batch_f, {1.0, 2 * a, 0.01});
  CHECK(at_2a.l_unl - at_a.l_unl == doctest::Approx(-a * at_a.l_forg).epsilon(1e-9));
}

TEST_CASE("grad_head_composite matches finite differences of the full objective") {
  Rng rng(37);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform_int(8));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int c = 2 + static_cast<int>(rng.uniform_int(3));
    const ModelState baseline = random_state(rng, d, h, c);
    ModelState state = baseline;
    for (double& v : state.head.w2) v += rng.uniform(-0.5, 0.5);
    for (double& v : state.head.b2) v += rng.uniform(-0.5, 0.5);

    std::vector<std::vector<double>> s1, s2;
    const Batch batch_r = random_batch(rng, s1, 1 + static_cast<int>(rng.uniform_int(5)), d, c);
    const Batch batch_f = random_batch(rng, s2, 1 + static_cast<int>(rng.uniform_int(5)), d, c);
    const CompositeWeights weights{0.2 + rng.uniform(), 0.2 + rng.uniform(),
                                   0.05 + 0.2 * rng.uniform()};

    const HeadGrad grad = grad_head_composite(state, baseline, batch_r, batch_f, weights);
    std::vector<double> flat(grad.w2);
    flat.insert(flat.end(), grad.b2.begin(), grad.b2.end());

    auto refs = head_params(state);
    const auto fd = central_differences(
        refs,
        [&] { return objective_components(state, baseline, batch_r, batch_f, weights).l_unl; },
        1e-5);
    CHECK(max_rel_error(flat, fd) <= 1e-5);
  }
}

TEST_CASE("grad_head_composite rejects a thawed backbone") {
  Rng rng(41);
  const ModelState baseline = random_state(rng, 3, 3, 3);
  ModelState tampered = baseline;
  tampered.backbone.w1[0] += 1e-9;
  std::vector<std::vector<double>> s1, s2;
  const Batch batch_r = random_batch(rng, s1, 2, 3, 3);
  const Batch batch_f = random_batch(rng, s2, 2, 3, 3);
  try {
    grad_head_composite(tampered, baseline, batch_r, batch_f, {1, 1, 1});
    FAIL("expected freeze violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Freeze);
  }
  CHECK_THROWS_AS(grad_head_composite(baseline, baseline, Batch{}, batch_f, {1, 1, 1}), Error);
  CHECK_THROWS_AS(grad_head_composite(baseline, baseline, batch_r, Batch{}, {1, 1, 1}), Error);
}

TEST_CASE("init_model is seeded and in range") {
  const ModelState a = init_model({4, 5, 3}, 99);
  const ModelState b = init_model({4, 5, 3}, 99);
  const ModelState c = init_model({4, 5, 3}, 100);
  CHECK(a == b);
  CHECK(!(a == c));
  for (double v : a.backbone.w1) {
    CHECK(v >= -0.1);
    CHECK(v <= 0.1);
  }
}
