#pragma once

#include "uqseg/types.hpp"

namespace uqseg {

// Synthetic stand-in for a trained segmentation model: turns ground truth
// into sampled probability fields with controllable uncertainty content.
struct SimulatorConfig {
  ModelFamily family = ModelFamily::TTD;
  std::int64_t n_samples = 8;
  double fidelity = 1.0;            // how sharply mean logits track truth
  double sample_spread = 0.4;       // between-sample logit noise sd
  double ood_spread_multiplier = 4.0;
  double border_softness = 1.5;     // logit slope at mask borders; 0 = hard
  std::uint64_t seed = 0;
};

void validate_config(const SimulatorConfig& cfg);

// Exact squared Euclidean distance to the nearest set voxel (lower envelope
// of parabolas, dimension by dimension). Voxels with no set voxel anywhere
// get a large finite sentinel.
std::vector<double> squared_distance_to_set(
    const std::vector<std::uint8_t>& target,
    const std::vector<std::int64_t>& shape);

// Signed Euclidean distance in voxels, positive inside the mask.
std::vector<double> signed_distance(const LabelField& mask,
                                    std::int64_t positive_class = 1);

// Mean logits from the rater-averaged signed distance; every sample adds
// i.i.d. Gaussian logit noise (spread scaled up on OoD cases). Binary output
// (background, foreground).
ProbabilityStack simulate_predictions(const CaseRecord& rec,
                                      const SimulatorConfig& cfg);

// Each sample follows one interpolated rater contour (uniform draw over the
// volume-ordered rater family) so the sample axis carries label-variability
// draws instead of i.i.d. noise. Needs at least 2 raters.
ProbabilityStack simulate_ssn_samples(const CaseRecord& rec,
                                      const SimulatorConfig& cfg);

// Family dispatch: SSN takes the contour-sampling path when the case offers
// at least two rater contours (a single mask leaves nothing to interpolate,
// so it degenerates to the i.i.d.-noise path); everything else uses the
// i.i.d.-noise path (DETERMINISTIC with a single noise-free sample).
ProbabilityStack simulate_for_family(const CaseRecord& rec,
                                     const SimulatorConfig& cfg);

}  // namespace uqseg
