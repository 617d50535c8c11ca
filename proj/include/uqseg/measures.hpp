#pragma once

#include <utility>

#include "uqseg/core.hpp"
#include "uqseg/types.hpp"

namespace uqseg {

// Which measures a model family provides, and the uncertainty type each one
// is conventionally taken to capture for that family.
struct MeasureSemantics {
  ModelFamily family;
  std::vector<std::pair<Measure, UncertaintyType>> mapping;
};

// Entropy in nats with 0*ln(0) := 0. `p` must be a distribution (sum 1
// within 1e-6, non-negative); throws INVALID_DISTRIBUTION otherwise.
double shannon_entropy(const double* p, std::int64_t classes);
double shannon_entropy(const std::vector<double>& p);

// Entropy of the sample-mean distribution, per pixel.
UncertaintyMap predictive_entropy(const ProbabilityStack& stack);

// Mean over samples of the per-sample entropy. Needs S >= 2.
UncertaintyMap expected_entropy(const ProbabilityStack& stack);

// PE - EE per pixel. Round-off down to -1e-12 clamps to 0; anything more
// negative means the inputs are inconsistent and throws. Needs S >= 2.
UncertaintyMap mutual_information(const ProbabilityStack& stack);

// 1 - max_c p_c for a single-sample stack (S must be exactly 1).
UncertaintyMap msr_uncertainty(const ProbabilityStack& stack);

MeasureSemantics semantics_for(ModelFamily family);

// Dispatch by measure; tags the output with the claimed type for `family`.
UncertaintyMap compute_measure(const ProbabilityStack& stack, Measure m,
                               ModelFamily family);

}  // namespace uqseg
