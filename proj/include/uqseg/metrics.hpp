#pragma once

#include "uqseg/core.hpp"
#include "uqseg/types.hpp"

namespace uqseg {

struct RiskCoveragePoint {
  double coverage = 0.0;        // fraction of cases kept
  double selective_risk = 0.0;  // mean risk over the kept cases
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::int64_t count = 0;
};

struct PlattFit {
  double a = 0.0;
  double b = 0.0;
  // Set when the scores separate the outcomes perfectly, so the likelihood
  // diverges and the fitted confidences saturate; runaway parameters are
  // clamped at a cap instead of iterating forever.
  bool capped = false;
};

struct NccResult {
  double value = 0.0;
  // One of the maps was constant; the correlation is undefined and reported
  // as 0 with this flag raised.
  bool zero_variance = false;
};

// Binary Dice on `positive_class`; both masks empty counts as 1.
double dice(const LabelField& pred, const LabelField& ref,
            std::int64_t positive_class);

// Dice of the stack's mean-prediction argmax against each rater, averaged.
double mean_rater_dice(const ProbabilityStack& stack, const RaterSet& raters,
                       std::int64_t positive_class = 1);

// Probability that a random positive outranks a random negative, ties
// counted half (Mann-Whitney). Labels must contain both classes.
double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels);

// Selective risk at every distinct-confidence threshold, sorted by
// descending coverage (first point covers everything). Cases with equal
// confidence enter or leave the selection together.
std::vector<RiskCoveragePoint> risk_coverage_curve(
    const std::vector<double>& confidences, const std::vector<double>& risks);

// Trapezoidal area under the risk-coverage curve over coverage in [0, 1];
// below the smallest attainable coverage the curve extends flat.
double aurc(const std::vector<double>& confidences,
            const std::vector<double>& risks);

// Excess AURC over the best achievable ordering (confidence := -risk).
double e_aurc(const std::vector<double>& confidences,
              const std::vector<double>& risks);

// Maximum-likelihood logistic fit P(correct) = sigmoid(a*score + b) via
// damped Newton (tol 1e-8, at most 100 iterations).
PlattFit platt_scale(const std::vector<double>& scores,
                     const std::vector<int>& correct);

double platt_apply(const PlattFit& fit, double score);

std::vector<CalibrationBin> calibration_bins(
    const std::vector<double>& confidences, const std::vector<int>& correct,
    std::int64_t n_bins);

// Mean |confidence - accuracy| over the non-empty equal-width bins.
double ace(const std::vector<double>& confidences,
           const std::vector<int>& correct, std::int64_t n_bins = 10);

// Per-pixel population variance of the raters' binary indicators.
UncertaintyMap rater_variance_map(const RaterSet& raters,
                                  std::int64_t positive_class = 1);

// Pearson correlation with population standard deviations.
NccResult ncc(const UncertaintyMap& a, const UncertaintyMap& b);

// Generalized energy distance with d = 1 - Dice. Expectations enumerate the
// full cross products (self-pairs included) when both sets hold at most 32
// masks, otherwise seeded Monte Carlo with 1e5 pair draws.
double ged(const std::vector<LabelField>& pred_masks,
           const std::vector<LabelField>& rater_masks,
           std::int64_t positive_class = 1, std::uint64_t seed = 0);

// Relative Dice improvement of the method's query over random querying.
double al_improvement(double dice_t1_method, double dice_t2_method,
                      double dice_t1_random, double dice_t2_random);

}  // namespace uqseg
