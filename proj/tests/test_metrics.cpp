// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "sul/error.hpp"
#include "sul/metrics.hpp"
#include "sul/rng.hpp"

using namespace sul;

namespace {

ModelState random_state(Rng& rng, int d, int h, int c) {
  ModelState state = init_model({d, h, c}, rng.next_u64());
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2, &state.head.b2})
    for (double& v : *arr) v = rng.uniform(-1.0, 1.0);
  return state;
}

}  // namespace

TEST_CASE("evaluate counts correct argmax predictions") {
  // all-zero model predicts uniformly; argmax ties resolve to class 0
  ModelState state = init_model({2, 2, 4}, 1);
  for (auto* arr : {&state.backbone.w1, &state.backbone.b1, &state.head.w2, &state.head.b2})
    for (double& v : *arr) v = 0.0;

  std::map<std::string, std::vector<ClipRecord>> subjects;
  for (int i = 0; i < 8; ++i) {
    ClipRecord clip{"c" + std::to_string(i), "s", {0.1 * i, -0.2 * i}, i % 4, i % 4};
    subjects["s"].push_back(clip);
  }
  const SubjectPool pool(std::move(subjects), 4, 2);
  const auto clips = collect_clips(pool, {"s"});
  const EvalReport report = evaluate(state, clips, SplitTag::Eval);
  CHECK(report.accuracy == doctest::Approx(0.25));
  CHECK(report.total == 8);
  // every prediction landed in column 0
  for (int label = 0; label < 4; ++label) {
    CHECK(report.confusion[static_cast<std::size_t>(label) * 4] == 2);
    for (int pred = 1; pred < 4; ++pred)
      CHECK(report.confusion[static_cast<std::size_t>(label) * 4 + pred] == 0);
  }
  CHECK_THROWS_AS(evaluate(state, {}, SplitTag::Eval), Error);
}

TEST_CASE("a model predicting every clip correctly scores accuracy 1") {
  ModelState model = init_model({2, 2, 2}, 9);
  model.backbone.w1 = {6.0, -6.0, 6.0, -6.0};
  model.backbone.b1 = {0.0, 0.0};
  model.head.w2 = {50.0, -50.0, -50.0, 50.0};
  model.head.b2 = {0.0, 0.0};
  // hidden pattern is (+1, -1) for positive inputs and (-1, +1) for negative,
  // so class 0 wins on positive clips and class 1 on negative ones
  std::map<std::string, std::vector<ClipRecord>> subjects;
  subjects["s"] = {{"c0", "s", {1.0, 2.0}, 0, 0},
                   {"c1", "s", {0.5, 0.5}, 0, 0},
                   {"c2", "s", {-1.0, -2.0}, 1, 1},
                   {"c3", "s", {-0.5, -0.25}, 1, 1}};
  const SubjectPool pool(std::move(subjects), 2, 2);
  const EvalReport report = evaluate(model, collect_clips(pool, {"s"}), SplitTag::Eval);
  CHECK(report.accuracy == doctest::Approx(1.0));
}

TEST_CASE("evaluate matches a brute-force recount on random models") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const SubjectPool pool = generate_pool(6, {3, 8}, 3, 3, 2.0, rng.next_u64());
    const ModelState model = random_state(rng, 3, 4, 3);
    std::set<std::string> all(pool.subject_ids().begin(), pool.subject_ids().end());
    const auto clips = collect_clips(pool, all);
    const EvalReport report = evaluate(model, clips, SplitTag::Eval);

    std::vector<std::uint64_t> confusion(9, 0);
    std::uint64_t correct = 0;
    for (const auto* clip : clips) {
      const auto pred = forward(model, clip->features);
      int argmax = 0;
      for (int k = 1; k < 3; ++k)
        if (pred.probs[static_cast<std::size_t>(k)] > pred.probs[static_cast<std::size_t>(argmax)])
          argmax = k;
      confusion[static_cast<std::size_t>(clip->label) * 3 + argmax] += 1;
      if (argmax == clip->label) ++correct;
    }
    CHECK(report.confusion == confusion);
    CHECK(report.accuracy ==
          doctest::Approx(static_cast<double>(correct) / clips.size()).epsilon(1e-12));

    std::uint64_t trace = 0, total = 0;
    for (int i = 0; i < 3; ++i) {
      trace += confusion[static_cast<std::size_t>(i) * 3 + i];
      for (int j = 0; j < 3; ++j) total += confusion[static_cast<std::size_t>(i) * 3 + j];
    }
    CHECK(report.accuracy == doctest::Approx(static_cast<double>(trace) / total).epsilon(1e-12));
  }
}

TEST_CASE("ogr reproduces the reported main-table values") {
  const OgrRecord first = ogr(68.91, 70.49, 70.68);
  REQUIRE(first.ogr.has_value());
  CHECK(100.0 * *first.ogr == doctest::Approx(89.3).epsilon(0.0015));
  CHECK(first.delta_oracle == doctest::Approx(1.77).epsilon(1e-9));
  CHECK(first.delta_res == doctest::Approx(0.19).epsilon(1e-9));

  const OgrRecord second = ogr(64.74, 66.09, 66.20);
  REQUIRE(second.ogr.has_value());
  CHECK(100.0 * *second.ogr == doctest::Approx(92.5).epsilon(0.0015));
}

TEST_CASE("ogr endpoints and undefined cases") {
  const OgrRecord zero = ogr(70.0, 70.0, 71.0);
  CHECK(*zero.ogr == doctest::Approx(0.0));
  const OgrRecord one = ogr(70.0, 71.0, 71.0);
  CHECK(*one.ogr == doctest::Approx(1.0));
  CHECK(!ogr(70.0, 71.0, 70.0).ogr.has_value());
  CHECK(!ogr(70.0, 71.0, 69.0).ogr.has_value());
  const OgrRecord rec = ogr(70.0, 69.0, 72.0);
  CHECK(rec.delta_oracle == doctest::Approx((rec.m_u - rec.m_b) + rec.delta_res).epsilon(1e-12));
}

TEST_CASE("ogr is invariant under positive affine maps of the metric") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const double b = rng.uniform(0.0, 1.0);
    const double u = b + rng.uniform(-0.2, 0.4);
    const double o = b + 0.01 + rng.uniform(0.0, 0.4);
    const double scale = 0.1 + 10.0 * rng.uniform();
    const double shift = rng.uniform(-50.0, 50.0);
    const OgrRecord raw = ogr(b, u, o);
    const OgrRecord mapped = ogr(scale * b + shift, scale * u + shift, scale * o + shift);
    REQUIRE(raw.ogr.has_value() == mapped.ogr.has_value());
    if (raw.ogr)
      CHECK(*mapped.ogr == doctest::Approx(*raw.ogr).epsilon(1e-9));
  }
}

TEST_CASE("marginal gains reproduce the nested-sweep table") {
  // sweep A: oracle gains over baseline 68.91 are +1.02, +1.77, +1.49
  const std::vector<std::pair<int, OgrRecord>> sweep_a{
      {1, ogr(68.91, 69.75, 69.93)},
      {3, ogr(68.91, 70.49, 70.68)},
      {5, ogr(68.91, 70.12, 70.40)},
  };
  const auto gains = marginal_gains(sweep_a);
  REQUIRE(gains.size() == 3);
  CHECK(!gains[0].marginal_oracle.has_value());
  CHECK(*gains[1].marginal_oracle == doctest::Approx(0.75).epsilon(0.006));
  CHECK(*gains[2].marginal_oracle == doctest::Approx(-0.28).epsilon(0.02));

  // sweep B: unlearned gains are +0.56, +1.35, +1.12
  const std::vector<std::pair<int, OgrRecord>> sweep_b{
      {1, ogr(64.74, 65.30, 65.53)},
      {3, ogr(64.74, 66.09, 66.20)},
      {5, ogr(64.74, 65.86, 65.98)},
  };
  const auto sweep_b_gains = marginal_gains(sweep_b);
  CHECK(*sweep_b_gains[1].marginal_unl == doctest::Approx(0.79).epsilon(0.007));
  CHECK(*sweep_b_gains[2].marginal_unl == doctest::Approx(-0.23).epsilon(0.022));
}

TEST_CASE("constant gains have zero marginals and bad K sequences fail") {
  const std::vector<std::pair<int, OgrRecord>> constant{
      {1, ogr(60.0, 61.0, 62.0)}, {2, ogr(60.0, 61.0, 62.0)}, {4, ogr(60.0, 61.0, 62.0)}};
  for (const auto& g : marginal_gains(constant)) {
    if (g.marginal_oracle) CHECK(*g.marginal_oracle == doctest::Approx(0.0));
    if (g.marginal_unl) CHECK(*g.marginal_unl == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(marginal_gains({{3, ogr(1, 2, 3)}, {3, ogr(1, 2, 3)}}), Error);
  CHECK_THROWS_AS(marginal_gains({{5, ogr(1, 2, 3)}, {3, ogr(1, 2, 3)}}), Error);
  CHECK_THROWS_AS(marginal_gains({{3, ogr(1, 2, 3)}}), Error);
}

TEST_CASE("marginal gains telescope") {
  Rng rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::pair<int, OgrRecord>> records;
    const double base = rng.uniform(0.0, 1.0);
    int k = 0;
    const int n = 2 + static_cast<int>(rng.uniform_int(5));
    for (int i = 0; i < n; ++i) {
      k += 1 + static_cast<int>(rng.uniform_int(3));
      records.emplace_back(k, ogr(base, base + rng.uniform(-0.1, 0.3), base + rng.uniform(-0.1, 0.3)));
    }
    const auto gains = marginal_gains(records);
    double sum = gains.front().delta_oracle;
    for (std::size_t i = 1; i < gains.size(); ++i) sum += *gains[i].marginal_oracle;
    CHECK(sum == doctest::Approx(gains.back().delta_oracle).epsilon(1e-12));
  }
}

TEST_CASE("relative compute is a step ratio") {
  ComputeLedger baseline;
  baseline.gradient_steps = 400;
  ComputeLedger stage;
  stage.gradient_steps = 100;
  CHECK(relative_compute(stage, baseline) == doctest::Approx(0.25));
  CHECK(relative_compute(baseline, baseline) == doctest::Approx(1.0));
  ComputeLedger oracle;
  oracle.gradient_steps = 360;
  CHECK(relative_compute(oracle, baseline) == doctest::Approx(0.9));
  ComputeLedger empty;
  CHECK_THROWS_AS(relative_compute(stage, empty), Error);
}
