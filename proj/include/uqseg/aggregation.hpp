#pragma once

#include <optional>

#include "uqseg/types.hpp"

namespace uqseg {

enum class Aggregation { IMAGE_SUM, PATCH_MAX, THRESHOLD_MEAN };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

struct AggregationSpec {
  Aggregation strategy = Aggregation::IMAGE_SUM;
  std::int64_t window_edge = 10;
  std::optional<double> threshold;  // required for THRESHOLD_MEAN
};

// Sum of every pixel value.
double aggregate_image_sum(const UncertaintyMap& map);

// Max over all stride-1 valid D-dim windows of the windowed sum. A window
// edge longer than a spatial extent clips to that extent in that dimension.
double aggregate_patch_max(const UncertaintyMap& map, std::int64_t window_edge);

// Mean of pixels strictly above lambda; 0 when none qualify.
double aggregate_threshold_mean(const UncertaintyMap& map, double lambda);

// lambda = q-quantile (linear interpolation between order statistics) of the
// pooled validation uncertainties, with q = 1 - alpha and alpha the mean
// foreground ratio of the predicted validation masks (label > 0).
double compute_threshold(const std::vector<UncertaintyMap>& val_maps,
                         const std::vector<LabelField>& val_pred_masks);

double aggregate(const UncertaintyMap& map, const AggregationSpec& spec);

// The strategies were designed for particular scene types (summation for
// multi-object scenes, thresholded mean for single-object crops); using one
// outside its home turf is allowed but flagged.
std::vector<std::string> aggregation_warnings(Aggregation strategy,
                                              bool single_object_data);

}  // namespace uqseg
