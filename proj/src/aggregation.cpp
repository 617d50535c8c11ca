#include "uqseg/aggregation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace uqseg {
namespace {

// Pads a rank-2/3 shape to exactly three dims with leading 1s so the window
// scan below only has to handle one rank.
std::array<std::int64_t, 3> pad3(const std::vector<std::int64_t>& shape) {
  std::array<std::int64_t, 3> out{1, 1, 1};
  const std::size_t off = 3 - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) out[off + i] = shape[i];
  return out;
}

// Linear-interpolation quantile between order statistics: h = (n-1)q.
double interp_quantile(std::vector<double>& values, double q) {
  std::sort(values.begin(), values.end());
  const std::int64_t n = static_cast<std::int64_t>(values.size());
  if (n == 1) return values[0];
  const double h = static_cast<double>(n - 1) * q;
  const std::int64_t lo = static_cast<std::int64_t>(std::floor(h));
  if (lo >= n - 1) return values[n - 1];
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::IMAGE_SUM: return "image_sum";
    case Aggregation::PATCH_MAX: return "patch_max";
    case Aggregation::THRESHOLD_MEAN: return "threshold_mean";
  }
  return "?";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "image_sum") return Aggregation::IMAGE_SUM;
  if (s == "patch_max") return Aggregation::PATCH_MAX;
  if (s == "threshold_mean") return Aggregation::THRESHOLD_MEAN;
  throw Error(Err::CONFIG_INVALID, "unknown aggregation: " + std::string(s));
}

double aggregate_image_sum(const UncertaintyMap& map) {
  double sum = 0.0;
  for (double x : map.data) sum += x;
  return sum;
}

double aggregate_patch_max(const UncertaintyMap& map, std::int64_t window_edge) {
  if (window_edge < 1)
    throw Error(Err::CONFIG_INVALID, "window edge must be at least 1");
  if (map.data.empty()) throw Error(Err::EMPTY_INPUT, "empty uncertainty map");

  const auto ext = pad3(map.spatial);
  const std::int64_t nz = ext[0], ny = ext[1], nx = ext[2];

  // Inclusive prefix sums with a zero border: P[z][y][x] holds the sum of the
  // box [0,z) x [0,y) x [0,x).
  const std::int64_t pz = nz + 1, py = ny + 1, px = nx + 1;
  std::vector<double> pre(pz * py * px, 0.0);
  auto P = [&](std::int64_t z, std::int64_t y, std::int64_t x) -> double& {
    return pre[(z * py + y) * px + x];
  };
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t y = 0; y < ny; ++y)
      for (std::int64_t x = 0; x < nx; ++x) {
        const double v = map.data[(z * ny + y) * nx + x];
        P(z + 1, y + 1, x + 1) = v + P(z, y + 1, x + 1) + P(z + 1, y, x + 1) -
                                 P(z, y, x + 1) + P(z + 1, y + 1, x) -
                                 P(z, y + 1, x) - P(z + 1, y, x) + P(z, y, x);
      }

  const std::int64_t wz = std::min(window_edge, nz);
  const std::int64_t wy = std::min(window_edge, ny);
  const std::int64_t wx = std::min(window_edge, nx);
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t z = 0; z + wz <= nz; ++z)
    for (std::int64_t y = 0; y + wy <= ny; ++y)
      for (std::int64_t x = 0; x + wx <= nx; ++x) {
        const std::int64_t z2 = z + wz, y2 = y + wy, x2 = x + wx;
        const double s = P(z2, y2, x2) - P(z, y2, x2) - P(z2, y, x2) +
                         P(z, y, x2) - P(z2, y2, x) + P(z, y2, x) +
                         P(z2, y, x) - P(z, y, x);
        best = std::max(best, s);
      }
  return best;
}

double aggregate_threshold_mean(const UncertaintyMap& map, double lambda) {
  if (lambda < 0.0)
    throw Error(Err::CONFIG_INVALID, "threshold must be non-negative");
  double sum = 0.0;
  std::int64_t count = 0;
  for (double x : map.data)
    if (x > lambda) {
      sum += x;
      ++count;
    }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double compute_threshold(const std::vector<UncertaintyMap>& val_maps,
                         const std::vector<LabelField>& val_pred_masks) {
  if (val_maps.empty() || val_maps.size() != val_pred_masks.size())
    throw Error(Err::EMPTY_VALIDATION,
                "threshold needs aligned, non-empty validation maps and masks");

  double alpha = 0.0;
  std::int64_t pooled = 0;
  for (const auto& m : val_pred_masks) {
    if (m.data.empty())
      throw Error(Err::EMPTY_VALIDATION, "empty validation mask");
    std::int64_t fg = 0;
    for (std::uint8_t v : m.data) fg += v > 0;
    alpha += static_cast<double>(fg) / static_cast<double>(m.data.size());
  }
  alpha /= static_cast<double>(val_pred_masks.size());
  for (const auto& m : val_maps) pooled += static_cast<std::int64_t>(m.data.size());
  if (pooled == 0)
    throw Error(Err::EMPTY_VALIDATION, "no pooled validation uncertainties");

  std::vector<double> values;
  values.reserve(pooled);
  for (const auto& m : val_maps)
    values.insert(values.end(), m.data.begin(), m.data.end());
  return interp_quantile(values, 1.0 - alpha);
}

double aggregate(const UncertaintyMap& map, const AggregationSpec& spec) {
  switch (spec.strategy) {
    case Aggregation::IMAGE_SUM:
      return aggregate_image_sum(map);
    case Aggregation::PATCH_MAX:
      return aggregate_patch_max(map, spec.window_edge);
    case Aggregation::THRESHOLD_MEAN:
      if (!spec.threshold)
        throw Error(Err::CONFIG_INVALID, "threshold_mean needs a threshold");
      return aggregate_threshold_mean(map, *spec.threshold);
  }
  throw Error(Err::INTERNAL_INCONSISTENCY, "unhandled aggregation");
}

std::vector<std::string> aggregation_warnings(Aggregation strategy,
                                              bool single_object_data) {
  std::vector<std::string> tags;
  if (strategy == Aggregation::IMAGE_SUM && single_object_data)
    tags.push_back("image_sum_tracks_object_size_on_single_object_data");
  if (strategy == Aggregation::THRESHOLD_MEAN && !single_object_data)
    tags.push_back("threshold_mean_designed_for_single_object_data");
  return tags;
}

}  // namespace uqseg
