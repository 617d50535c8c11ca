#include "uqseg/core.hpp"

#include <cmath>
#include <cstdio>

#include "uqseg/parallel.hpp"

namespace uqseg {
namespace {

constexpr double kNormTol = 1e-6;

ValidationResult fail(Err code, std::string message, std::int64_t index) {
  return ValidationResult{false, code, std::move(message), index};
}

}  // namespace

ValidationResult validate_stack(const ProbabilityStack& stack) {
  if (stack.samples < 1)
    return fail(Err::SHAPE_MISMATCH, "stack needs at least one sample", -1);
  if (stack.classes < 2)
    return fail(Err::SHAPE_MISMATCH, "stack needs at least two classes", -1);
  if (stack.spatial.size() != 2 && stack.spatial.size() != 3)
    return fail(Err::SHAPE_MISMATCH, "spatial rank must be 2 or 3", -1);
  for (std::int64_t d : stack.spatial)
    if (d < 1) return fail(Err::SHAPE_MISMATCH, "spatial extent must be positive", -1);
  const std::int64_t v = stack.voxels();
  if (static_cast<std::int64_t>(stack.data.size()) != stack.expected_size())
    return fail(Err::SHAPE_MISMATCH, "data size does not match S*C*spatial", -1);

  for (std::int64_t s = 0; s < stack.samples; ++s) {
    for (std::int64_t p = 0; p < v; ++p) {
      double sum = 0.0;
      for (std::int64_t c = 0; c < stack.classes; ++c) {
        const std::int64_t idx = (s * stack.classes + c) * v + p;
        const double x = stack.data[idx];
        if (!(x >= 0.0))
          return fail(Err::NEGATIVE_PROBABILITY, "probability below zero", idx);
        if (x > 1.0 + kNormTol)
          return fail(Err::ROW_NOT_NORMALIZED, "probability above one", idx);
        sum += x;
      }
      if (std::abs(sum - 1.0) > kNormTol) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "row sums to %.9g", sum);
        return fail(Err::ROW_NOT_NORMALIZED, buf, (s * stack.classes) * v + p);
      }
    }
  }
  return ValidationResult{true, Err::INTERNAL_INCONSISTENCY, "", -1};
}

void require_valid(const ProbabilityStack& stack) {
  ValidationResult r = validate_stack(stack);
  if (!r) throw Error(r.code, r.message);
}

MeanPrediction mean_prediction(const ProbabilityStack& stack) {
  require_valid(stack);
  const std::int64_t v = stack.voxels();
  const std::int64_t c = stack.classes;
  MeanPrediction out;
  out.classes = c;
  out.spatial = stack.spatial;
  out.mean.assign(c * v, 0.0);
  out.argmax.assign(v, 0);

  const double inv_s = 1.0 / static_cast<double>(stack.samples);
  for (std::int64_t s = 0; s < stack.samples; ++s)
    for (std::int64_t k = 0; k < c; ++k) {
      const double* src = stack.data.data() + (s * c + k) * v;
      double* dst = out.mean.data() + k * v;
      for (std::int64_t p = 0; p < v; ++p) dst[p] += src[p];
    }
  for (double& x : out.mean) x *= inv_s;

  parallel_for(v, [&](std::int64_t p) {
    std::int64_t best = 0;
    double best_val = out.mean[p];
    for (std::int64_t k = 1; k < c; ++k) {
      const double val = out.mean[k * v + p];
      if (val > best_val) {  // strict: ties keep the lowest class
        best_val = val;
        best = k;
      }
    }
    out.argmax[p] = static_cast<std::uint8_t>(best);
  });
  return out;
}

}  // namespace uqseg
