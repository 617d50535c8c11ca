#include "uqseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqseg/rng.hpp"

namespace uqseg {
namespace {

constexpr double kPlattTol = 1e-8;
constexpr int kPlattMaxIter = 100;
constexpr double kPlattParamCap = 50.0;
// Any overlap in the score ordering costs at least ln 2 of likelihood, so a
// total NLL this small proves the scores separate the outcomes perfectly.
constexpr double kPlattSeparableNll = 1e-6;
constexpr std::size_t kGedEnumLimit = 32;
constexpr std::int64_t kGedMcDraws = 100000;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double log1pexp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double platt_nll(const std::vector<double>& scores,
                 const std::vector<int>& correct, double a, double b) {
  double nll = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double z = a * scores[i] + b;
    nll += log1pexp(z) - (correct[i] ? z : 0.0);
  }
  return nll;
}

double pair_distance(const std::vector<LabelField>& xs,
                     const std::vector<LabelField>& ys, std::size_t i,
                     std::size_t j, std::int64_t positive_class) {
  return 1.0 - dice(xs[i], ys[j], positive_class);
}

// Uniform average of d over the full ordered cross product, or a seeded
// Monte-Carlo estimate when that product is too large.
double expected_distance(const std::vector<LabelField>& xs,
                         const std::vector<LabelField>& ys,
                         std::int64_t positive_class, SplitRng& rng) {
  if (xs.size() <= kGedEnumLimit && ys.size() <= kGedEnumLimit) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j)
        sum += pair_distance(xs, ys, i, j, positive_class);
    return sum / static_cast<double>(xs.size() * ys.size());
  }
  double sum = 0.0;
  for (std::int64_t d = 0; d < kGedMcDraws; ++d) {
    const std::size_t i = static_cast<std::size_t>(rng.next_below(xs.size()));
    const std::size_t j = static_cast<std::size_t>(rng.next_below(ys.size()));
    sum += pair_distance(xs, ys, i, j, positive_class);
  }
  return sum / static_cast<double>(kGedMcDraws);
}

}  // namespace

double dice(const LabelField& pred, const LabelField& ref,
            std::int64_t positive_class) {
  if (pred.spatial != ref.spatial || pred.data.size() != ref.data.size())
    throw Error(Err::SHAPE_MISMATCH, "dice inputs differ in shape");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] == positive_class;
    const bool r = ref.data[i] == positive_class;
    tp += p && r;
    fp += p && !r;
    fn += !p && r;
  }
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double mean_rater_dice(const ProbabilityStack& stack, const RaterSet& raters,
                       std::int64_t positive_class) {
  if (raters.raters < 1) throw Error(Err::NEEDS_RATERS, "no raters");
  MeanPrediction mp = mean_prediction(stack);
  LabelField pred;
  pred.spatial = mp.spatial;
  pred.data = mp.argmax;
  double sum = 0.0;
  for (std::int64_t r = 0; r < raters.raters; ++r)
    sum += dice(pred, raters.mask(r), positive_class);
  return sum / static_cast<double>(raters.raters);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error(Err::SHAPE_MISMATCH, "auroc inputs differ in length");
  const std::size_t n = scores.size();
  std::int64_t n_pos = 0;
  for (int l : labels) n_pos += l != 0;
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(Err::SINGLE_CLASS, "auroc needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, then the Mann-Whitney U statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RiskCoveragePoint> risk_coverage_curve(
    const std::vector<double>& confidences, const std::vector<double>& risks) {
  if (confidences.empty() || confidences.size() != risks.size())
    throw Error(Err::EMPTY_INPUT, "risk-coverage needs aligned, non-empty lists");
  const std::size_t n = confidences.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidences[a] > confidences[b];
  });

  // One point per distinct confidence value; ties share a threshold.
  std::vector<RiskCoveragePoint> points;
  double risk_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && confidences[order[j]] == confidences[order[i]]) {
      risk_sum += risks[order[j]];
      ++j;
    }
    points.push_back({static_cast<double>(j) / static_cast<double>(n),
                      risk_sum / static_cast<double>(j)});
    i = j;
  }
  std::reverse(points.begin(), points.end());  // descending coverage
  return points;
}

double aurc(const std::vector<double>& confidences,
            const std::vector<double>& risks) {
  std::vector<RiskCoveragePoint> pts = risk_coverage_curve(confidences, risks);
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    area += 0.5 * (pts[i].coverage - pts[i + 1].coverage) *
            (pts[i].selective_risk + pts[i + 1].selective_risk);
  // Flat extension from the smallest attainable coverage down to zero.
  area += pts.back().coverage * pts.back().selective_risk;
  return area;
}

double e_aurc(const std::vector<double>& confidences,
              const std::vector<double>& risks) {
  std::vector<double> oracle(risks.size());
  for (std::size_t i = 0; i < risks.size(); ++i) oracle[i] = -risks[i];
  return aurc(confidences, risks) - aurc(oracle, risks);
}

PlattFit platt_scale(const std::vector<double>& scores,
                     const std::vector<int>& correct) {
  if (scores.empty() || scores.size() != correct.size())
    throw Error(Err::EMPTY_INPUT, "platt fit needs aligned, non-empty lists");
  std::int64_t n_pos = 0;
  for (int c : correct) n_pos += c != 0;
  if (n_pos == 0 || n_pos == static_cast<std::int64_t>(correct.size()))
    throw Error(Err::SINGLE_CLASS, "platt fit needs both outcomes present");

  PlattFit fit;
  double nll = platt_nll(scores, correct, fit.a, fit.b);
  for (int iter = 0; iter < kPlattMaxIter; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double p = sigmoid(fit.a * scores[i] + fit.b);
      const double r = p - (correct[i] ? 1.0 : 0.0);
      const double w = p * (1.0 - p);
      ga += r * scores[i];
      gb += r;
      haa += w * scores[i] * scores[i];
      hab += w * scores[i];
      hbb += w;
    }
    if (std::abs(ga) < kPlattTol && std::abs(gb) < kPlattTol) {
      fit.capped = nll < kPlattSeparableNll;
      return fit;
    }

    // Tiny ridge keeps the 2x2 solve defined when all scores coincide.
    haa += 1e-12;
    hbb += 1e-12;
    const double det = haa * hbb - hab * hab;
    double da = -(hbb * ga - hab * gb) / det;
    double db = -(haa * gb - hab * ga) / det;

    double step = 1.0;
    double next_a = fit.a, next_b = fit.b, next_nll = nll;
    for (int halving = 0; halving < 40; ++halving) {
      const double ca = fit.a + step * da;
      const double cb = fit.b + step * db;
      const double cand = platt_nll(scores, correct, ca, cb);
      if (cand <= nll) {
        next_a = ca;
        next_b = cb;
        next_nll = cand;
        break;
      }
      step *= 0.5;
    }
    fit.a = next_a;
    fit.b = next_b;
    const bool stalled = nll - next_nll < kPlattTol * (1.0 + std::abs(nll));
    nll = next_nll;

    if (std::abs(fit.a) > kPlattParamCap || std::abs(fit.b) > kPlattParamCap) {
      // Perfect separation: the likelihood keeps improving as parameters
      // diverge. Clamp and report instead of iterating to the limit.
      fit.a = std::clamp(fit.a, -kPlattParamCap, kPlattParamCap);
      fit.b = std::clamp(fit.b, -kPlattParamCap, kPlattParamCap);
      fit.capped = true;
      return fit;
    }
    if (stalled) {
      fit.capped = nll < kPlattSeparableNll;
      return fit;
    }
  }
  throw Error(Err::NO_CONVERGENCE, "platt fit did not converge");
}

double platt_apply(const PlattFit& fit, double score) {
  return sigmoid(fit.a * score + fit.b);
}

std::vector<CalibrationBin> calibration_bins(
    const std::vector<double>& confidences, const std::vector<int>& correct,
    std::int64_t n_bins) {
  if (confidences.empty() || confidences.size() != correct.size())
    throw Error(Err::EMPTY_INPUT, "calibration needs aligned, non-empty lists");
  if (n_bins < 1) throw Error(Err::CONFIG_INVALID, "need at least one bin");

  std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
  std::vector<std::int64_t> count(n_bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0))
      throw Error(Err::INVALID_DISTRIBUTION, "confidence outside [0, 1]");
    std::int64_t b = static_cast<std::int64_t>(c * static_cast<double>(n_bins));
    if (b == n_bins) b = n_bins - 1;  // confidence exactly 1.0
    conf_sum[b] += c;
    acc_sum[b] += correct[i] ? 1.0 : 0.0;
    ++count[b];
  }

  std::vector<CalibrationBin> bins;
  for (std::int64_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double n = static_cast<double>(count[b]);
    bins.push_back({static_cast<double>(b) / static_cast<double>(n_bins),
                    static_cast<double>(b + 1) / static_cast<double>(n_bins),
                    conf_sum[b] / n, acc_sum[b] / n, count[b]});
  }
  return bins;
}

double ace(const std::vector<double>& confidences,
           const std::vector<int>& correct, std::int64_t n_bins) {
  std::vector<CalibrationBin> bins = calibration_bins(confidences, correct, n_bins);
  double sum = 0.0;
  for (const auto& b : bins) sum += std::abs(b.mean_confidence - b.accuracy);
  return sum / static_cast<double>(bins.size());
}

UncertaintyMap rater_variance_map(const RaterSet& raters,
                                  std::int64_t positive_class) {
  if (raters.raters < 2)
    throw Error(Err::NEEDS_RATERS, "rater variance needs at least 2 raters");
  UncertaintyMap u;
  u.spatial = raters.spatial;
  u.claimed_type = UncertaintyType::AU;  // inter-rater variability
  const std::int64_t v = raters.voxels();
  u.data.assign(v, 0.0);
  const double r = static_cast<double>(raters.raters);
  for (std::int64_t p = 0; p < v; ++p) {
    std::int64_t k = 0;
    for (std::int64_t i = 0; i < raters.raters; ++i)
      k += raters.masks[i * v + p] == positive_class;
    const double mean = static_cast<double>(k) / r;
    u.data[p] = mean * (1.0 - mean);
  }
  return u;
}

NccResult ncc(const UncertaintyMap& a, const UncertaintyMap& b) {
  if (a.spatial != b.spatial || a.data.size() != b.data.size())
    throw Error(Err::SHAPE_MISMATCH, "ncc inputs differ in shape");
  if (a.data.empty()) throw Error(Err::EMPTY_INPUT, "ncc on empty maps");
  const double n = static_cast<double>(a.data.size());
  double mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    mu_a += a.data[i];
    mu_b += b.data[i];
  }
  mu_a /= n;
  mu_b /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double da = a.data[i] - mu_a;
    const double db = b.data[i] - mu_b;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  // A constant map can leave rounding residue around its accumulated mean;
  // spread at that scale is degeneracy, not signal.
  const double sd_a = std::sqrt(va / n);
  const double sd_b = std::sqrt(vb / n);
  if (sd_a <= 1e-12 * std::abs(mu_a) || sd_b <= 1e-12 * std::abs(mu_b))
    return {0.0, true};
  return {cov / (std::sqrt(va) * std::sqrt(vb)), false};
}

double ged(const std::vector<LabelField>& pred_masks,
           const std::vector<LabelField>& rater_masks,
           std::int64_t positive_class, std::uint64_t seed) {
  if (pred_masks.empty() || rater_masks.empty())
    throw Error(Err::EMPTY_SET, "ged needs non-empty prediction and rater sets");
  SplitRng rng(seed);
  SplitRng rng_cross = rng.child("cross");
  SplitRng rng_raters = rng.child("raters");
  SplitRng rng_preds = rng.child("preds");
  const double cross =
      expected_distance(rater_masks, pred_masks, positive_class, rng_cross);
  const double within_r =
      expected_distance(rater_masks, rater_masks, positive_class, rng_raters);
  const double within_p =
      expected_distance(pred_masks, pred_masks, positive_class, rng_preds);
  const double sq = 2.0 * cross - within_r - within_p;
  return std::sqrt(std::max(0.0, sq));
}

double al_improvement(double dice_t1_method, double dice_t2_method,
                      double dice_t1_random, double dice_t2_random) {
  if (dice_t1_method <= 0.0 || dice_t1_random <= 0.0)
    throw Error(Err::ZERO_BASELINE, "first-cycle Dice must be positive");
  const double c_method = (dice_t2_method - dice_t1_method) / dice_t1_method;
  const double c_random = (dice_t2_random - dice_t1_random) / dice_t1_random;
  return c_method - c_random;
}

}  // namespace uqseg
