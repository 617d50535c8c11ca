#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "uqseg/error.hpp"
#include "uqseg/metrics.hpp"
#include "uqseg/rng.hpp"

using namespace uqseg;

namespace {

LabelField make_mask(std::vector<std::int64_t> spatial,
                     std::vector<std::uint8_t> data) {
  LabelField f;
  f.spatial = std::move(spatial);
  f.data = std::move(data);
  return f;
}

UncertaintyMap make_map(std::vector<std::int64_t> spatial,
                        std::vector<double> data) {
  UncertaintyMap u;
  u.spatial = std::move(spatial);
  u.data = std::move(data);
  return u;
}

// Pairwise-counting AUROC oracle: concordant pairs + half credit for ties.
double auroc_oracle(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
  double num = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] != 1 || labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        num += 1.0;
      else if (scores[i] == scores[j])
        num += 0.5;
    }
  return num / static_cast<double>(pairs);
}

// All-threshold AURC oracle: selective risk recomputed from scratch at every
// distinct confidence, trapezoid between points, flat below the smallest
// attainable coverage.
double aurc_oracle(const std::vector<double>& conf,
                   const std::vector<double>& risks) {
  std::vector<double> thresholds = conf;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  const double n = static_cast<double>(conf.size());
  std::vector<std::pair<double, double>> pts;  // coverage, selective risk
  for (double t : thresholds) {
    double risk_sum = 0.0;
    std::int64_t kept = 0;
    for (std::size_t i = 0; i < conf.size(); ++i)
      if (conf[i] >= t) {
        risk_sum += risks[i];
        ++kept;
      }
    pts.emplace_back(kept / n, risk_sum / kept);
  }
  std::sort(pts.begin(), pts.end());  // ascending coverage
  double area = pts.front().first * pts.front().second;  // flat extension
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += 0.5 * (pts[i].second + pts[i - 1].second) *
            (pts[i].first - pts[i - 1].first);
  return area;
}

std::vector<double> negated(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
  return out;
}

// Expected pairwise 1 - Dice over two mask collections, enumerated.
double mean_pair_distance(const std::vector<LabelField>& a,
                          const std::vector<LabelField>& b) {
  double sum = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) sum += 1.0 - dice(x, y, 1);
  return sum / static_cast<double>(a.size() * b.size());
}

LabelField random_mask(std::uint64_t seed) {
  SplitRng rng(seed);
  LabelField f;
  f.spatial = {4, 4, 4};
  f.data.resize(64);
  for (auto& x : f.data) x = rng.bernoulli(0.4) ? 1 : 0;
  return f;
}

}  // namespace

TEST_CASE("dice worked values") {
  const auto a = make_mask({4}, {1, 1, 1, 0});
  const auto b = make_mask({4}, {1, 1, 1, 1});
  // pred covers ref plus one extra voxel, |ref| = 3 -> 6/7.
  CHECK(dice(b, a, 1) == doctest::Approx(6.0 / 7.0).epsilon(1e-12));
  CHECK(dice(a, a, 1) == 1.0);
  const auto c = make_mask({4}, {0, 0, 0, 1});
  CHECK(dice(a, c, 1) == 0.0);
  const auto empty = make_mask({4}, {0, 0, 0, 0});
  CHECK(dice(empty, empty, 1) == 1.0);  // both-empty convention
  CHECK(dice(a, empty, 1) == 0.0);
}

TEST_CASE("dice respects the positive class") {
  const auto a = make_mask({3}, {2, 2, 0});
  const auto b = make_mask({3}, {2, 0, 0});
  CHECK(dice(a, b, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(dice(a, b, 1) == 1.0);  // neither holds class 1
}

TEST_CASE("dice requires matching shapes") {
  CHECK_THROWS_AS(
      dice(make_mask({2}, {1, 0}), make_mask({3}, {1, 0, 0}), 1),
      const Error&);
}

TEST_CASE("mean rater dice averages per-rater scores") {
  // Prediction equals rater 1, disjoint from rater 2 -> 0.5.
  ProbabilityStack st;
  st.samples = 1;
  st.classes = 2;
  st.spatial = {2, 2};
  // Layout [sample][class][pixel]: class0 = {0.9,0.9,0.1,0.1},
  // class1 = {0.1,0.1,0.9,0.9} -> argmax mask = 0 0 1 1.
  st.data = {0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.9, 0.9};
  RaterSet raters;
  raters.raters = 2;
  raters.spatial = {2, 2};
  raters.masks = {0, 0, 1, 1, 1, 1, 0, 0};
  CHECK(mean_rater_dice(st, raters) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc worked value and oracle equivalence") {
  CHECK(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) ==
        doctest::Approx(0.75).epsilon(1e-12));
  CHECK(auroc({0.0, 1.0}, {0, 1}) == 1.0);
  CHECK(auroc({0.3, 0.3, 0.3, 0.3}, {0, 1, 0, 1}) == 0.5);

  SplitRng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t n = 2 + rng.next_below(198);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool seen0 = false, seen1 = false;
    for (std::int64_t i = 0; i < n; ++i) {
      // A coarse value grid forces plenty of ties.
      scores[i] = static_cast<double>(rng.next_below(7)) / 6.0;
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      (labels[i] ? seen1 : seen0) = true;
    }
    if (!seen0 || !seen1) {
      labels[0] = 0;
      labels[n - 1] = 1;
    }
    CHECK(auroc(scores, labels) ==
          doctest::Approx(auroc_oracle(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("auroc needs both classes") {
  try {
    auroc({0.1, 0.2}, {1, 1});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::SINGLE_CLASS);
  }
}

TEST_CASE("risk-coverage curve of the worked instance") {
  const auto pts = risk_coverage_curve({3, 2, 1}, {0, 0.5, 1.0});
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].coverage == doctest::Approx(1.0));
  CHECK(pts[0].selective_risk == doctest::Approx(0.5));
  CHECK(pts[1].coverage == doctest::Approx(2.0 / 3.0));
  CHECK(pts[1].selective_risk == doctest::Approx(0.25));
  CHECK(pts[2].coverage == doctest::Approx(1.0 / 3.0));
  CHECK(pts[2].selective_risk == doctest::Approx(0.0));
}

TEST_CASE("tied confidences enter and leave the selection together") {
  const auto pts = risk_coverage_curve({2, 1, 1, 0}, {0, 1, 0, 1});
  REQUIRE(pts.size() == 3);  // thresholds 2, 1, 0
  CHECK(pts[0].coverage == doctest::Approx(1.0));
  CHECK(pts[1].coverage == doctest::Approx(0.75));
  CHECK(pts[1].selective_risk == doctest::Approx(1.0 / 3.0));
  CHECK(pts[2].coverage == doctest::Approx(0.25));
  CHECK(pts[2].selective_risk == doctest::Approx(0.0));
}

TEST_CASE("aurc worked values") {
  CHECK(aurc({3, 2, 1}, {0, 0.5, 1.0}) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(aurc({3, 2, 1}, {0, 0, 0}) == 0.0);
  // Constant risk: flat curve at r regardless of the ranking.
  CHECK(aurc({5, 1, 3, 2}, {0.37, 0.37, 0.37, 0.37}) ==
        doctest::Approx(0.37).epsilon(1e-12));
  CHECK(aurc({1, 1}, {0.2, 0.8}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("aurc equals the all-threshold oracle on small instances") {
  SplitRng rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const std::int64_t n = 1 + rng.next_below(12);
    std::vector<double> conf(n), risks(n);
    for (std::int64_t i = 0; i < n; ++i) {
      conf[i] = static_cast<double>(rng.next_below(5));  // heavy ties
      risks[i] = static_cast<double>(rng.next_below(4)) / 3.0;
    }
    CHECK(aurc(conf, risks) ==
          doctest::Approx(aurc_oracle(conf, risks)).epsilon(1e-12));
    CHECK(e_aurc(conf, risks) ==
          doctest::Approx(aurc_oracle(conf, risks) -
                          aurc_oracle(negated(risks), risks))
              .epsilon(1e-11));
  }
}

TEST_CASE("excess aurc of oracle and anti-oracle rankings") {
  const std::vector<double> risks{0, 0.5, 1.0};
  CHECK(e_aurc(negated(risks), risks) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e_aurc({3, 2, 1}, {0, 0.5, 1.0}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  // Two cases with risks {0,1}: the anti-oracle keeps the risky case
  // longest (AURC 0.875) while the oracle sheds it first (AURC 0.125).
  const double gap = e_aurc({0, 1}, {0, 1});
  CHECK(gap == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(gap > 0.0);
  CHECK(e_aurc({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("aurc rejects empty and mismatched inputs") {
  CHECK_THROWS_AS(aurc({}, {}), const Error&);
  CHECK_THROWS_AS(aurc({1.0}, {0.5, 0.5}), const Error&);
}

TEST_CASE("platt fit reproduces group means") {
  // Score -1: 2 of 5 correct. Score +1: 4 of 5 correct. The two-parameter
  // logistic saturates a two-point design, so the MLE hits the empirical
  // rates exactly.
  std::vector<double> scores;
  std::vector<int> correct;
  for (int i = 0; i < 5; ++i) {
    scores.push_back(-1.0);
    correct.push_back(i < 2 ? 1 : 0);
    scores.push_back(1.0);
    correct.push_back(i < 4 ? 1 : 0);
  }
  const PlattFit fit = platt_scale(scores, correct);
  CHECK_FALSE(fit.capped);
  CHECK(platt_apply(fit, -1.0) == doctest::Approx(0.4).epsilon(1e-3));
  CHECK(platt_apply(fit, 1.0) == doctest::Approx(0.8).epsilon(1e-3));
}

TEST_CASE("labels independent of scores: slope zero, intercept base rate") {
  // Both score groups carry the same 70% accuracy, so the likelihood is
  // maximized by the constant predictor.
  std::vector<double> scores;
  std::vector<int> correct;
  for (int i = 0; i < 10; ++i) {
    scores.push_back(-1.0);
    correct.push_back(i < 7 ? 1 : 0);
    scores.push_back(1.0);
    correct.push_back(i < 7 ? 1 : 0);
  }
  const PlattFit fit = platt_scale(scores, correct);
  CHECK(std::abs(fit.a) < 1e-4);
  CHECK(platt_apply(fit, 0.0) == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("perfect separation is capped instead of diverging") {
  const PlattFit fit =
      platt_scale({-2, -1, 1, 2}, {0, 0, 1, 1});
  CHECK(fit.capped);
  CHECK(platt_apply(fit, 2.0) > 0.99);
  CHECK(platt_apply(fit, -2.0) < 0.01);
}

TEST_CASE("calibration bins and ace hand values") {
  // Two occupied bins: (conf 0.2, acc 0.2) and (conf 0.9, acc 0.7).
  std::vector<double> conf;
  std::vector<int> correct;
  for (int i = 0; i < 10; ++i) {
    conf.push_back(0.2);
    correct.push_back(i < 2 ? 1 : 0);
    conf.push_back(0.9);
    correct.push_back(i < 7 ? 1 : 0);
  }
  CHECK(ace(conf, correct, 10) == doctest::Approx(0.1).epsilon(1e-12));

  const auto bins = calibration_bins(conf, correct, 10);
  std::int64_t occupied = 0;
  for (const auto& b : bins)
    if (b.count > 0) ++occupied;
  CHECK(occupied == 2);
}

TEST_CASE("confidence 1.0 lands in the last bin") {
  const std::vector<double> conf{1.0, 1.0};
  const std::vector<int> correct{1, 0};
  const auto bins = calibration_bins(conf, correct, 10);
  CHECK(bins.back().count == 2);
  CHECK(ace(conf, correct, 10) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ace rejects out-of-range confidences") {
  CHECK_THROWS_AS(ace({1.2}, {1}, 10), const Error&);
  CHECK_THROWS_AS(ace({-0.1}, {0}, 10), const Error&);
  CHECK_THROWS_AS(ace({}, {}, 10), const Error&);
}

TEST_CASE("rater variance worked values") {
  RaterSet raters;
  raters.raters = 4;
  raters.spatial = {2};
  // Pixel 0: 3 of 4 positive -> 3/16. Pixel 1: all agree -> 0.
  raters.masks = {1, 0, 1, 0, 1, 0, 0, 0};
  const UncertaintyMap u = rater_variance_map(raters);
  CHECK(u.data[0] == doctest::Approx(3.0 / 16.0).epsilon(1e-12));
  CHECK(u.data[1] == 0.0);
  CHECK(u.claimed_type == UncertaintyType::AU);

  RaterSet two;
  two.raters = 2;
  two.spatial = {1};
  two.masks = {1, 0};
  CHECK(rater_variance_map(two).data[0] ==
        doctest::Approx(0.25).epsilon(1e-12));

  RaterSet one;
  one.raters = 1;
  one.spatial = {1};
  one.masks = {1};
  CHECK_THROWS_AS(rater_variance_map(one), const Error&);
}

TEST_CASE("ncc worked values") {
  const auto a = make_map({4}, {0.1, 0.5, 0.3, 0.9});
  auto b = a;
  for (double& x : b.data) x = 2.0 * x;
  CHECK(ncc(a, a).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ncc(a, b).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ncc(make_map({3}, {0, 1, 0}), make_map({3}, {0, -1, 0})).value ==
        doctest::Approx(-1.0).epsilon(1e-12));

  const NccResult flat = ncc(make_map({4}, {0.5, 0.5, 0.5, 0.5}), a);
  CHECK(flat.zero_variance);
  CHECK(flat.value == 0.0);

  CHECK_THROWS_AS(ncc(make_map({3}, {0.5, 0.5, 0.5}), a), const Error&);
}

TEST_CASE("constant maps with accumulation residue are degenerate") {
  // Summing 64 copies of 0.7 leaves rounding residue around the mean; that
  // spread must read as degeneracy, not as a correlation.
  const auto flat = make_map({4, 4, 4}, std::vector<double>(64, 0.7));
  std::vector<double> varying(64);
  for (int i = 0; i < 64; ++i) varying[i] = 0.1 * (i % 7);
  const NccResult r = ncc(flat, make_map({4, 4, 4}, varying));
  CHECK(r.zero_variance);
  CHECK(r.value == 0.0);
}

TEST_CASE("ged worked values") {
  const auto A = make_mask({4}, {1, 1, 0, 0});
  const auto B = make_mask({4}, {0, 1, 1, 0});  // Dice(A,B) = 0.5
  REQUIRE(dice(A, B, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ged({A}, {A, B}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ged({A, B}, {A, B}) == doctest::Approx(0.0).epsilon(1e-12));

  const auto C = make_mask({4}, {0, 0, 1, 1});  // disjoint from A
  CHECK(ged({A}, {C}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(ged({}, {A}), const Error&);
  CHECK_THROWS_AS(ged({A}, {}), const Error&);
}

TEST_CASE("ged enumeration matches the pairwise oracle") {
  std::vector<LabelField> preds, raters;
  for (std::uint64_t i = 0; i < 7; ++i) preds.push_back(random_mask(100 + i));
  for (std::uint64_t i = 0; i < 4; ++i) raters.push_back(random_mask(200 + i));
  const double cross = mean_pair_distance(preds, raters);
  const double within_p = mean_pair_distance(preds, preds);
  const double within_r = mean_pair_distance(raters, raters);
  const double expected =
      std::sqrt(std::max(0.0, 2.0 * cross - within_p - within_r));
  CHECK(ged(preds, raters) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ged monte carlo stays close to enumeration on large sets") {
  std::vector<LabelField> preds, raters;
  for (std::uint64_t i = 0; i < 40; ++i) preds.push_back(random_mask(300 + i));
  for (std::uint64_t i = 0; i < 5; ++i) raters.push_back(random_mask(400 + i));
  const double cross = mean_pair_distance(preds, raters);
  const double within_p = mean_pair_distance(preds, preds);
  const double within_r = mean_pair_distance(raters, raters);
  const double exact =
      std::sqrt(std::max(0.0, 2.0 * cross - within_p - within_r));
  const double mc = ged(preds, raters, 1, 9);
  CHECK(std::abs(mc - exact) < 0.02);  // ~3 sigma of 1e5 bounded draws
  CHECK(ged(preds, raters, 1, 9) == doctest::Approx(mc));  // seeded
}

TEST_CASE("active-learning improvement arithmetic") {
  CHECK(al_improvement(0.60, 0.66, 0.60, 0.63) ==
        doctest::Approx(0.05).epsilon(1e-12));
  CHECK(al_improvement(0.5, 0.6, 0.5, 0.6) == doctest::Approx(0.0));
  CHECK(al_improvement(0.5, 0.45, 0.5, 0.6) < 0.0);
  try {
    al_improvement(0.0, 0.5, 0.4, 0.5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::ZERO_BASELINE);
  }
}
