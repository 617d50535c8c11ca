#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "uqseg/aggregation.hpp"
#include "uqseg/error.hpp"
#include "uqseg/rng.hpp"

using namespace uqseg;

namespace {

UncertaintyMap make_map(std::vector<std::int64_t> spatial,
                        std::vector<double> data) {
  UncertaintyMap u;
  u.spatial = std::move(spatial);
  u.data = std::move(data);
  return u;
}

UncertaintyMap random_map(std::vector<std::int64_t> spatial,
                          std::uint64_t seed) {
  UncertaintyMap u;
  u.spatial = std::move(spatial);
  u.data.resize(numel(u.spatial));
  SplitRng rng(seed);
  for (double& x : u.data) x = rng.next_double();
  return u;
}

// Brute-force window oracle: enumerate every valid window position and sum
// entry by entry. Shapes of rank 1-3 via padding with extent 1.
double patch_oracle(const UncertaintyMap& u, std::int64_t w) {
  std::vector<std::int64_t> d = u.spatial;
  while (d.size() < 3) d.insert(d.begin(), 1);
  const auto wd = [&](int axis) { return std::min(w, d[axis]); };
  const std::int64_t wz = wd(0), wy = wd(1), wx = wd(2);
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t z = 0; z + wz <= d[0]; ++z)
    for (std::int64_t y = 0; y + wy <= d[1]; ++y)
      for (std::int64_t x = 0; x + wx <= d[2]; ++x) {
        double sum = 0.0;
        for (std::int64_t dz = 0; dz < wz; ++dz)
          for (std::int64_t dy = 0; dy < wy; ++dy)
            for (std::int64_t dx = 0; dx < wx; ++dx)
              sum += u.data[((z + dz) * d[1] + y + dy) * d[2] + x + dx];
        best = std::max(best, sum);
      }
  return best;
}

LabelField make_mask(std::vector<std::int64_t> spatial,
                     std::vector<std::uint8_t> data) {
  LabelField f;
  f.spatial = std::move(spatial);
  f.data = std::move(data);
  return f;
}

}  // namespace

TEST_CASE("image sum worked values") {
  CHECK(aggregate_image_sum(make_map({3}, {0.0, 0.0, 0.0})) == 0.0);
  CHECK(aggregate_image_sum(make_map({3}, {0.2, 0.6, 0.8})) ==
        doctest::Approx(1.6).epsilon(1e-12));
  const auto u = random_map({4, 5}, 1);
  CHECK(aggregate_image_sum(make_map({4, 5},
                                     [&] {
                                       auto d = u.data;
                                       for (double& x : d) x *= 2.0;
                                       return d;
                                     }())) ==
        doctest::Approx(2.0 * aggregate_image_sum(u)).epsilon(1e-12));
}

TEST_CASE("patch max 1D worked example") {
  // Map [0,1,3,2,0], window 2: window sums [1,4,5,2] -> 5.
  CHECK(aggregate_patch_max(make_map({5}, {0, 1, 3, 2, 0}), 2) ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("constant map: every window ties at u*w^3") {
  UncertaintyMap u;
  u.spatial = {8, 8, 8};
  u.data.assign(512, 0.3);
  CHECK(aggregate_patch_max(u, 4) ==
        doctest::Approx(0.3 * 64).epsilon(1e-12));
}

TEST_CASE("window larger than the map clips to the total sum") {
  const auto u = random_map({3, 4}, 7);
  CHECK(aggregate_patch_max(u, 10) ==
        doctest::Approx(aggregate_image_sum(u)).epsilon(1e-12));
}

TEST_CASE("window clips per dimension") {
  const auto u = random_map({2, 9}, 8);
  CHECK(aggregate_patch_max(u, 5) ==
        doctest::Approx(patch_oracle(u, 5)).epsilon(1e-12));
}

TEST_CASE("patch max equals the enumeration oracle on random maps") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto u3 =
        random_map({5 + static_cast<std::int64_t>(seed % 3), 7, 6}, 100 + seed);
    for (std::int64_t w : {1, 2, 3, 5, 7, 9})
      CHECK(aggregate_patch_max(u3, w) ==
            doctest::Approx(patch_oracle(u3, w)).epsilon(1e-10));
    const auto u2 = random_map({6, 9}, 200 + seed);
    for (std::int64_t w : {1, 3, 4, 8})
      CHECK(aggregate_patch_max(u2, w) ==
            doctest::Approx(patch_oracle(u2, w)).epsilon(1e-10));
  }
}

TEST_CASE("patch max rejects nonpositive windows") {
  CHECK_THROWS_AS(aggregate_patch_max(random_map({3, 3}, 1), 0), const Error&);
}

TEST_CASE("threshold mean worked values") {
  const auto u = make_map({3}, {0.2, 0.6, 0.8});
  CHECK(aggregate_threshold_mean(u, 0.5) ==
        doctest::Approx(0.7).epsilon(1e-12));
  CHECK(aggregate_threshold_mean(u, 2.0) == 0.0);            // empty set
  CHECK(aggregate_threshold_mean(u, 0.8) == 0.0);            // strictly above
  CHECK(aggregate_threshold_mean(u, 0.0) ==
        doctest::Approx((0.2 + 0.6 + 0.8) / 3).epsilon(1e-12));
  CHECK_THROWS_AS(aggregate_threshold_mean(u, -0.1), const Error&);
}

TEST_CASE("validation threshold worked example") {
  // One case, 10% predicted foreground, pooled values 0.0..0.9:
  // q = 0.9 and lambda = 0.81 by linear interpolation.
  UncertaintyMap u;
  u.spatial = {10};
  u.data = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  LabelField mask = make_mask({10}, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const double lambda = compute_threshold({u}, {mask});
  CHECK(lambda == doctest::Approx(0.81).epsilon(1e-12));
}

TEST_CASE("threshold boundaries: alpha 0 and alpha 1") {
  UncertaintyMap u;
  u.spatial = {4};
  u.data = {0.4, 0.1, 0.9, 0.3};
  const auto none = make_mask({4}, {0, 0, 0, 0});
  CHECK(compute_threshold({u}, {none}) ==
        doctest::Approx(0.9).epsilon(1e-12));  // q = 1 -> max
  const auto all = make_mask({4}, {1, 1, 1, 1});
  CHECK(compute_threshold({u}, {all}) ==
        doctest::Approx(0.1).epsilon(1e-12));  // q = 0 -> min
}

TEST_CASE("threshold pools values across cases") {
  UncertaintyMap a;
  a.spatial = {2};
  a.data = {1.0, 3.0};
  UncertaintyMap b;
  b.spatial = {2};
  b.data = {2.0, 4.0};
  // alpha = mean(0.5, 0.5) = 0.5 -> q = 0.5 over {1,2,3,4} -> 2.5.
  const auto half = make_mask({2}, {1, 0});
  CHECK(compute_threshold({a, b}, {half, half}) ==
        doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("empty validation sets are rejected") {
  try {
    compute_threshold({}, {});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::EMPTY_VALIDATION);
  }
  UncertaintyMap u;
  u.spatial = {2};
  u.data = {0.1, 0.2};
  CHECK_THROWS_AS(compute_threshold({u}, {}), const Error&);
}

TEST_CASE("aggregate dispatch honors the spec") {
  const auto u = make_map({4}, {0.1, 0.2, 0.3, 0.4});
  AggregationSpec spec;
  spec.strategy = Aggregation::IMAGE_SUM;
  CHECK(aggregate(u, spec) == doctest::Approx(1.0).epsilon(1e-12));
  spec.strategy = Aggregation::PATCH_MAX;
  spec.window_edge = 2;
  CHECK(aggregate(u, spec) == doctest::Approx(0.7).epsilon(1e-12));
  spec.strategy = Aggregation::THRESHOLD_MEAN;
  CHECK_THROWS_AS(aggregate(u, spec), const Error&);  // threshold missing
  spec.threshold = 0.25;
  CHECK(aggregate(u, spec) == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("aggregation names round-trip") {
  for (Aggregation a : {Aggregation::IMAGE_SUM, Aggregation::PATCH_MAX,
                        Aggregation::THRESHOLD_MEAN})
    CHECK(aggregation_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(aggregation_from_string("mean"), const Error&);
}

TEST_CASE("strategy/data pairing warnings") {
  CHECK(aggregation_warnings(Aggregation::IMAGE_SUM, true).size() == 1);
  CHECK(aggregation_warnings(Aggregation::THRESHOLD_MEAN, false).size() == 1);
  CHECK(aggregation_warnings(Aggregation::THRESHOLD_MEAN, true).empty());
  CHECK(aggregation_warnings(Aggregation::PATCH_MAX, true).empty());
  CHECK(aggregation_warnings(Aggregation::PATCH_MAX, false).empty());
}
