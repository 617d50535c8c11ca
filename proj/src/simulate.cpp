#include "uqseg/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "uqseg/parallel.hpp"
#include "uqseg/rng.hpp"

namespace uqseg {
namespace {

constexpr double kFar = 1e12;       // squared-distance sentinel: empty set
constexpr double kHardLogit = 1e6;  // saturates the sigmoid exactly

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// 1D squared-distance transform (lower envelope of parabolas).
void dt1d(double* f, std::int64_t n, std::int64_t stride, double* scratch_f,
          double* scratch_z, std::int64_t* scratch_v) {
  for (std::int64_t i = 0; i < n; ++i) scratch_f[i] = f[i * stride];
  std::int64_t k = 0;
  scratch_v[0] = 0;
  scratch_z[0] = -kFar;
  scratch_z[1] = kFar;
  for (std::int64_t q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const std::int64_t p = scratch_v[k];
      s = ((scratch_f[q] + static_cast<double>(q * q)) -
           (scratch_f[p] + static_cast<double>(p * p))) /
          (2.0 * static_cast<double>(q - p));
      if (s > scratch_z[k]) break;
      --k;
    }
    ++k;
    scratch_v[k] = q;
    scratch_z[k] = s;
    scratch_z[k + 1] = kFar;
  }
  k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (scratch_z[k + 1] < static_cast<double>(q)) ++k;
    const std::int64_t p = scratch_v[k];
    const double d = static_cast<double>(q - p);
    f[q * stride] = d * d + scratch_f[p];
  }
}

// Per-sample pixel noise; kept as a helper so both simulators share the
// derivation path (seed -> case -> sample).
SplitRng sample_rng(const SimulatorConfig& cfg, const std::string& case_id,
                    std::int64_t sample) {
  return SplitRng(cfg.seed)
      .child(case_id)
      .child("sample")
      .child(static_cast<std::uint64_t>(sample));
}

double effective_spread(const CaseRecord& rec, const SimulatorConfig& cfg) {
  double spread = cfg.sample_spread;
  if (rec.split == Split::OOD) spread *= cfg.ood_spread_multiplier;
  return spread;
}

ProbabilityStack blank_stack(const CaseRecord& rec, std::int64_t n_samples) {
  ProbabilityStack st;
  st.samples = n_samples;
  st.classes = 2;
  st.spatial = rec.spatial;
  st.data.assign(st.expected_size(), 0.0);
  return st;
}

// Mean foreground logit per pixel given a signed-distance field.
double mean_logit(double sd, const SimulatorConfig& cfg) {
  if (cfg.border_softness == 0.0) return sd > 0.0 ? kHardLogit : -kHardLogit;
  return cfg.fidelity * sd / cfg.border_softness;
}

void fill_sample(ProbabilityStack& st, std::int64_t sample,
                 const std::vector<double>& logits) {
  const std::int64_t v = st.voxels();
  double* bg = st.data.data() + (sample * 2 + 0) * v;
  double* fg = st.data.data() + (sample * 2 + 1) * v;
  for (std::int64_t p = 0; p < v; ++p) {
    const double pf = sigmoid(logits[p]);
    fg[p] = pf;
    bg[p] = 1.0 - pf;
  }
}

const RaterSet& require_raters(const CaseRecord& rec, std::int64_t min_r) {
  if (!rec.raters || rec.raters->raters < min_r)
    throw Error(Err::NEEDS_RATERS, "case lacks the required rater masks");
  return *rec.raters;
}

}  // namespace

void validate_config(const SimulatorConfig& cfg) {
  if (cfg.fidelity < 0.0 || cfg.fidelity > 1.0)
    throw Error(Err::CONFIG_INVALID, "fidelity must lie in [0, 1]");
  if (cfg.sample_spread < 0.0)
    throw Error(Err::CONFIG_INVALID, "sample_spread must be non-negative");
  if (cfg.ood_spread_multiplier < 1.0)
    throw Error(Err::CONFIG_INVALID, "ood_spread_multiplier must be >= 1");
  if (cfg.border_softness < 0.0)
    throw Error(Err::CONFIG_INVALID, "border_softness must be non-negative");
  if (cfg.family == ModelFamily::DETERMINISTIC) {
    if (cfg.n_samples != 1)
      throw Error(Err::CONFIG_INVALID, "deterministic family uses one sample");
  } else if (cfg.n_samples < 2) {
    throw Error(Err::CONFIG_INVALID, "sampling families need >= 2 samples");
  }
}

std::vector<double> squared_distance_to_set(
    const std::vector<std::uint8_t>& target,
    const std::vector<std::int64_t>& shape) {
  const std::int64_t n = numel(shape);
  if (n == 0 || static_cast<std::int64_t>(target.size()) != n)
    throw Error(Err::SHAPE_MISMATCH, "distance transform shape mismatch");

  std::vector<double> d(n);
  for (std::int64_t i = 0; i < n; ++i) d[i] = target[i] ? 0.0 : kFar;

  // Transform one axis at a time; lines along an axis are independent.
  std::int64_t suffix = n;  // product of extents from this axis rightwards
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    const std::int64_t extent = shape[axis];
    suffix /= extent;
    const std::int64_t stride = suffix;
    const std::int64_t lines = n / extent;
    std::vector<double> sf(extent), sz(extent + 1);
    std::vector<std::int64_t> sv(extent);
    for (std::int64_t line = 0; line < lines; ++line) {
      // Decompose the line index into (block before axis, offset after).
      const std::int64_t outer = line / suffix;
      const std::int64_t inner = line % suffix;
      double* start = d.data() + outer * extent * suffix + inner;
      dt1d(start, extent, stride, sf.data(), sz.data(), sv.data());
    }
  }
  return d;
}

std::vector<double> signed_distance(const LabelField& mask,
                                    std::int64_t positive_class) {
  const std::int64_t n = numel(mask.spatial);
  std::vector<std::uint8_t> fg(n), bg(n);
  for (std::int64_t i = 0; i < n; ++i) {
    fg[i] = mask.data[i] == positive_class;
    bg[i] = !fg[i];
  }
  std::vector<double> d_fg = squared_distance_to_set(fg, mask.spatial);
  std::vector<double> d_bg = squared_distance_to_set(bg, mask.spatial);
  std::vector<double> sd(n);
  for (std::int64_t i = 0; i < n; ++i)
    sd[i] = std::sqrt(std::min(d_bg[i], kFar)) -
            std::sqrt(std::min(d_fg[i], kFar));
  return sd;
}

ProbabilityStack simulate_predictions(const CaseRecord& rec,
                                      const SimulatorConfig& cfg) {
  validate_config(cfg);
  const RaterSet& raters = require_raters(rec, 1);
  const std::int64_t v = numel(rec.spatial);

  // Rater-averaged signed distance is the model's notion of the truth.
  std::vector<double> sd_avg(v, 0.0);
  for (std::int64_t r = 0; r < raters.raters; ++r) {
    std::vector<double> sd = signed_distance(raters.mask(r));
    for (std::int64_t p = 0; p < v; ++p) sd_avg[p] += sd[p];
  }
  for (double& x : sd_avg) x /= static_cast<double>(raters.raters);

  const double spread = effective_spread(rec, cfg);
  ProbabilityStack st = blank_stack(rec, cfg.n_samples);
  parallel_for(cfg.n_samples, [&](std::int64_t s) {
    std::vector<double> logits(v);
    if (cfg.family == ModelFamily::DETERMINISTIC || spread == 0.0) {
      for (std::int64_t p = 0; p < v; ++p) logits[p] = mean_logit(sd_avg[p], cfg);
    } else {
      SplitRng rng = sample_rng(cfg, rec.case_id, s);
      for (std::int64_t p = 0; p < v; ++p)
        logits[p] = mean_logit(sd_avg[p], cfg) + rng.next_normal() * spread;
    }
    fill_sample(st, s, logits);
  });
  return st;
}

ProbabilityStack simulate_ssn_samples(const CaseRecord& rec,
                                      const SimulatorConfig& cfg) {
  validate_config(cfg);
  const RaterSet& raters = require_raters(rec, 2);
  const std::int64_t v = numel(rec.spatial);
  const std::int64_t nr = raters.raters;

  // Signed-distance field per rater, ordered by mask volume so interpolation
  // sweeps from the smallest contour to the largest.
  std::vector<std::pair<std::int64_t, std::int64_t>> order;  // (volume, rater)
  for (std::int64_t r = 0; r < nr; ++r) {
    std::int64_t vol = 0;
    for (std::int64_t p = 0; p < v; ++p) vol += raters.masks[r * v + p] == 1;
    order.emplace_back(vol, r);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::vector<double>> sd(nr);
  for (std::int64_t i = 0; i < nr; ++i)
    sd[i] = signed_distance(raters.mask(order[i].second));

  // Contour-variability noise is kept small relative to the between-sample
  // signal; it scales with sample_spread so spread 0 stays exactly noiseless.
  const double noise_sd = 0.25 * effective_spread(rec, cfg);
  ProbabilityStack st = blank_stack(rec, cfg.n_samples);
  parallel_for(cfg.n_samples, [&](std::int64_t s) {
    SplitRng rng = sample_rng(cfg, rec.case_id, s);
    const double t = rng.next_double() * static_cast<double>(nr - 1);
    const std::int64_t lo =
        std::min(static_cast<std::int64_t>(t), nr - 2);
    const double frac = t - static_cast<double>(lo);

    std::vector<double> logits(v);
    for (std::int64_t p = 0; p < v; ++p) {
      const double sd_t = (1.0 - frac) * sd[lo][p] + frac * sd[lo + 1][p];
      double z = mean_logit(sd_t, cfg);
      if (noise_sd > 0.0) z += rng.next_normal() * noise_sd;
      logits[p] = z;
    }
    fill_sample(st, s, logits);
  });
  return st;
}

ProbabilityStack simulate_for_family(const CaseRecord& rec,
                                     const SimulatorConfig& cfg) {
  // A single reference mask leaves no contour family to interpolate, so the
  // label-variability sampler degenerates to the i.i.d.-noise sampler (the
  // same reduction as identical raters).
  if (cfg.family == ModelFamily::SSN && rec.raters && rec.raters->raters >= 2)
    return simulate_ssn_samples(rec, cfg);
  return simulate_predictions(rec, cfg);
}

}  // namespace uqseg
