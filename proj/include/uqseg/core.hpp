#pragma once

#include "uqseg/types.hpp"

namespace uqseg {

// Checks every ProbabilityStack invariant: shape consistency, value range,
// and per-(sample,pixel) normalization within 1e-6. On failure the result
// carries the flat data index of the first offending entry (or the first
// pixel of the offending row for normalization errors).
ValidationResult validate_stack(const ProbabilityStack& stack);

// Throwing variant for call sites that have no graceful fallback.
void require_valid(const ProbabilityStack& stack);

struct MeanPrediction {
  std::int64_t classes = 0;
  std::vector<std::int64_t> spatial;
  std::vector<double> mean;       // [class][spatial...], rows sum to 1
  std::vector<std::uint8_t> argmax;  // [spatial...], ties -> lowest class
};

// Mean over the sample axis plus pixelwise argmax of that mean.
MeanPrediction mean_prediction(const ProbabilityStack& stack);

}  // namespace uqseg
