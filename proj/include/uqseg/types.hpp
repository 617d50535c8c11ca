#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uqseg/error.hpp"

namespace uqseg {

// Prediction-model families. The sample axis of a ProbabilityStack carries a
// different random variable per family (parameter draws, augmentations, or
// label-variability draws), but the array layout is identical for all.
enum class ModelFamily { DETERMINISTIC, TTD, ENSEMBLE, TTA, SSN };

enum class Measure { PE, EE, MI, ONE_MINUS_MSR };

enum class UncertaintyType { PU, AU, EU };

enum class Split { IID, OOD };

enum class Role { TRAIN, VAL, TEST, POOL };

std::string_view to_string(ModelFamily f);
std::string_view to_string(Measure m);
std::string_view to_string(UncertaintyType t);
std::string_view to_string(Split s);
std::string_view to_string(Role r);

ModelFamily family_from_string(std::string_view s);
Measure measure_from_string(std::string_view s);
UncertaintyType uncertainty_type_from_string(std::string_view s);
Split split_from_string(std::string_view s);
Role role_from_string(std::string_view s);

std::int64_t numel(const std::vector<std::int64_t>& shape);

// S sampled class-probability fields for one case. Values are post-softmax
// probabilities; raw logits are never stored. Layout is C-order
// [sample][class][spatial...].
struct ProbabilityStack {
  std::int64_t samples = 0;
  std::int64_t classes = 0;
  std::vector<std::int64_t> spatial;
  std::vector<double> data;

  std::int64_t voxels() const { return numel(spatial); }
  std::int64_t expected_size() const { return samples * classes * voxels(); }

  double at(std::int64_t sample, std::int64_t cls, std::int64_t voxel) const {
    return data[(sample * classes + cls) * voxels() + voxel];
  }
};

// Integer label field over the spatial grid.
struct LabelField {
  std::vector<std::int64_t> spatial;
  std::vector<std::uint8_t> data;
};

// R reference masks per case, layout [rater][spatial...].
struct RaterSet {
  std::int64_t raters = 0;
  std::vector<std::int64_t> spatial;
  std::vector<std::uint8_t> masks;

  std::int64_t voxels() const { return numel(spatial); }

  LabelField mask(std::int64_t r) const {
    LabelField f;
    f.spatial = spatial;
    f.data.assign(masks.begin() + r * voxels(), masks.begin() + (r + 1) * voxels());
    return f;
  }
};

// Scalar per-pixel uncertainty field tagged with the measure that produced it
// and the uncertainty type that measure claims to capture.
struct UncertaintyMap {
  std::vector<std::int64_t> spatial;
  std::vector<double> data;
  Measure measure = Measure::PE;
  UncertaintyType claimed_type = UncertaintyType::PU;

  std::int64_t voxels() const { return numel(spatial); }
};

// One evaluation case. Stubs produced by generators carry image and raters
// only; simulators fill in the stack.
struct CaseRecord {
  std::string case_id;
  Split split = Split::IID;
  Role role = Role::TEST;
  std::vector<std::string> scenario_tags;

  std::vector<std::int64_t> spatial;
  std::vector<double> image;

  std::optional<ProbabilityStack> stack;
  std::optional<RaterSet> raters;
};

}  // namespace uqseg
