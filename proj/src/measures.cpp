#include "uqseg/measures.hpp"

#include <cmath>

#include "uqseg/parallel.hpp"

namespace uqseg {
namespace {

constexpr double kNormTol = 1e-6;
constexpr double kMiGuard = 1e-12;

double entropy_unchecked(const double* p, std::int64_t classes) {
  double h = 0.0;
  for (std::int64_t c = 0; c < classes; ++c)
    if (p[c] > 0.0) h -= p[c] * std::log(p[c]);
  return h;
}

UncertaintyMap blank_map(const ProbabilityStack& stack, Measure m,
                         UncertaintyType t) {
  UncertaintyMap u;
  u.spatial = stack.spatial;
  u.data.assign(stack.voxels(), 0.0);
  u.measure = m;
  u.claimed_type = t;
  return u;
}

}  // namespace

double shannon_entropy(const double* p, std::int64_t classes) {
  double sum = 0.0;
  for (std::int64_t c = 0; c < classes; ++c) {
    if (!(p[c] >= 0.0))
      throw Error(Err::INVALID_DISTRIBUTION, "negative probability in entropy input");
    sum += p[c];
  }
  if (std::abs(sum - 1.0) > kNormTol)
    throw Error(Err::INVALID_DISTRIBUTION, "entropy input does not sum to 1");
  return entropy_unchecked(p, classes);
}

double shannon_entropy(const std::vector<double>& p) {
  return shannon_entropy(p.data(), static_cast<std::int64_t>(p.size()));
}

UncertaintyMap predictive_entropy(const ProbabilityStack& stack) {
  MeanPrediction mp = mean_prediction(stack);
  UncertaintyMap u = blank_map(stack, Measure::PE, UncertaintyType::PU);
  const std::int64_t v = stack.voxels();
  const std::int64_t c = stack.classes;
  parallel_for(v, [&](std::int64_t p) {
    double h = 0.0;
    for (std::int64_t k = 0; k < c; ++k) {
      const double x = mp.mean[k * v + p];
      if (x > 0.0) h -= x * std::log(x);
    }
    u.data[p] = h;
  });
  return u;
}

UncertaintyMap expected_entropy(const ProbabilityStack& stack) {
  require_valid(stack);
  if (stack.samples < 2)
    throw Error(Err::NEEDS_SAMPLING, "expected entropy needs at least 2 samples");
  UncertaintyMap u = blank_map(stack, Measure::EE, UncertaintyType::AU);
  const std::int64_t v = stack.voxels();
  const std::int64_t c = stack.classes;
  const double inv_s = 1.0 / static_cast<double>(stack.samples);
  parallel_for(v, [&](std::int64_t p) {
    double acc = 0.0;
    for (std::int64_t s = 0; s < stack.samples; ++s) {
      for (std::int64_t k = 0; k < c; ++k) {
        const double x = stack.data[(s * c + k) * v + p];
        if (x > 0.0) acc -= x * std::log(x);
      }
    }
    u.data[p] = acc * inv_s;
  });
  return u;
}

UncertaintyMap mutual_information(const ProbabilityStack& stack) {
  require_valid(stack);
  if (stack.samples < 2)
    throw Error(Err::NEEDS_SAMPLING, "mutual information needs at least 2 samples");
  UncertaintyMap pe = predictive_entropy(stack);
  UncertaintyMap ee = expected_entropy(stack);
  UncertaintyMap u = blank_map(stack, Measure::MI, UncertaintyType::EU);
  for (std::int64_t p = 0; p < stack.voxels(); ++p) {
    double mi = pe.data[p] - ee.data[p];
    if (mi < 0.0) {
      if (mi < -kMiGuard)
        throw Error(Err::INTERNAL_INCONSISTENCY,
                    "mutual information negative beyond round-off guard");
      mi = 0.0;
    }
    u.data[p] = mi;
  }
  return u;
}

UncertaintyMap msr_uncertainty(const ProbabilityStack& stack) {
  require_valid(stack);
  if (stack.samples != 1)
    throw Error(Err::WRONG_SAMPLE_COUNT,
                "msr uncertainty is defined on a single-sample stack");
  UncertaintyMap u = blank_map(stack, Measure::ONE_MINUS_MSR, UncertaintyType::PU);
  const std::int64_t v = stack.voxels();
  parallel_for(v, [&](std::int64_t p) {
    double best = 0.0;
    for (std::int64_t k = 0; k < stack.classes; ++k)
      best = std::max(best, stack.data[k * v + p]);
    u.data[p] = 1.0 - best;
  });
  return u;
}

MeasureSemantics semantics_for(ModelFamily family) {
  MeasureSemantics s;
  s.family = family;
  switch (family) {
    case ModelFamily::DETERMINISTIC:
      s.mapping = {{Measure::ONE_MINUS_MSR, UncertaintyType::PU}};
      break;
    case ModelFamily::TTD:
    case ModelFamily::ENSEMBLE:
    case ModelFamily::TTA:
      s.mapping = {{Measure::PE, UncertaintyType::PU},
                   {Measure::MI, UncertaintyType::EU},
                   {Measure::EE, UncertaintyType::AU}};
      break;
    case ModelFamily::SSN:
      // Sampling-head draws follow label variability, so the roles of MI and
      // EE swap relative to the parameter-sampling families.
      s.mapping = {{Measure::PE, UncertaintyType::PU},
                   {Measure::MI, UncertaintyType::AU},
                   {Measure::EE, UncertaintyType::EU}};
      break;
  }
  return s;
}

UncertaintyMap compute_measure(const ProbabilityStack& stack, Measure m,
                               ModelFamily family) {
  UncertaintyMap u;
  switch (m) {
    case Measure::PE: u = predictive_entropy(stack); break;
    case Measure::EE: u = expected_entropy(stack); break;
    case Measure::MI: u = mutual_information(stack); break;
    case Measure::ONE_MINUS_MSR: u = msr_uncertainty(stack); break;
  }
  for (const auto& [measure, type] : semantics_for(family).mapping)
    if (measure == m) u.claimed_type = type;
  return u;
}

}  // namespace uqseg
