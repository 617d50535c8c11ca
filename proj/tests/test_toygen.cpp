#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "uqseg/error.hpp"
#include "uqseg/metrics.hpp"
#include "uqseg/toygen.hpp"

using namespace uqseg;

namespace {

std::int64_t volume(const RaterSet& raters, std::int64_t r) {
  std::int64_t v = 0;
  const std::int64_t n = numel(raters.spatial);
  for (std::int64_t i = 0; i < n; ++i) v += raters.masks[r * n + i] != 0;
  return v;
}

bool nested(const RaterSet& raters, std::int64_t inner, std::int64_t outer) {
  const std::int64_t n = numel(raters.spatial);
  for (std::int64_t i = 0; i < n; ++i)
    if (raters.masks[inner * n + i] && !raters.masks[outer * n + i])
      return false;
  return true;
}

ToyCaseSpec centered_spec(double radius, double blur, std::int64_t edge) {
  ToyCaseSpec spec;
  spec.radius = radius;
  const double c = static_cast<double>(edge - 1) / 2.0;
  spec.center = {c, c, c};
  spec.blur_sigma = blur;
  return spec;
}

std::map<std::string, std::int64_t> role_counts(const ScenarioPlan& plan) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& c : plan.cases) {
    counts[std::string(to_string(c.role)) + "/" +
           std::string(to_string(c.split))]++;
    if (std::find(c.tags.begin(), c.tags.end(), "blur") != c.tags.end())
      counts["blur/" + std::string(to_string(c.role))]++;
  }
  return counts;
}

}  // namespace

TEST_CASE("scenario table matches the published counts") {
  const ToyScenario s1 = scenario_table(ScenarioId::S1);
  CHECK(s1.n_train == 200);
  CHECK(s1.n_train_blur == 200);
  CHECK(s1.n_test_iid == 20);
  CHECK(s1.n_test_iid_blur == 20);
  CHECK(s1.n_test_ood == 0);

  const ToyScenario s2 = scenario_table(ScenarioId::S2);
  CHECK(s2.n_train == 200);
  CHECK(s2.n_train_blur == 0);
  CHECK(s2.n_test_iid == 21);
  CHECK(s2.n_test_iid_blur == 0);
  CHECK(s2.n_test_ood == 21);

  const ToyScenario s3a = scenario_table(ScenarioId::S3A);
  CHECK(s3a.n_train == 200);
  CHECK(s3a.n_train_blur == 100);
  CHECK(s3a.n_test_iid == 21);
  CHECK(s3a.n_test_iid_blur == 0);
  CHECK(s3a.n_test_ood == 21);

  const ToyScenario s3b = scenario_table(ScenarioId::S3B);
  CHECK(s3b.n_train == 200);
  CHECK(s3b.n_train_blur == 100);
  CHECK(s3b.n_test_iid == 42);
  CHECK(s3b.n_test_iid_blur == 21);
  CHECK(s3b.n_test_ood == 21);
}

TEST_CASE("scenario names round-trip") {
  for (ScenarioId id : {ScenarioId::S1, ScenarioId::S2, ScenarioId::S3A,
                        ScenarioId::S3B})
    CHECK(scenario_from_string(to_string(id)) == id);
  CHECK_THROWS_AS(scenario_from_string("s9"), const Error&);
}

TEST_CASE("blurred case has three nested raters at the declared ratios") {
  const auto spec = centered_spec(20.0, 2.0, 64);
  const ToyCase tc = generate_toy_case(spec, 64, 5);
  REQUIRE(tc.raters.raters == 3);
  CHECK(nested(tc.raters, 0, 1));
  CHECK(nested(tc.raters, 1, 2));

  const double v1 = static_cast<double>(volume(tc.raters, 0));
  const double v2 = static_cast<double>(volume(tc.raters, 1));
  const double v3 = static_cast<double>(volume(tc.raters, 2));
  CHECK(v1 / v3 == doctest::Approx(0.10).epsilon(0.05));
  CHECK(v2 / v3 == doctest::Approx(0.55).epsilon(0.05));
  // And the full mask is close to the analytic sphere volume.
  CHECK(v3 == doctest::Approx(4.0 * M_PI * 8000.0 / 3.0).epsilon(0.02));
}

TEST_CASE("crisp case: all raters identical, variance map zero") {
  const auto spec = centered_spec(9.0, 0.0, 32);
  const ToyCase tc = generate_toy_case(spec, 32, 5);
  REQUIRE(tc.raters.raters == 3);
  const std::int64_t n = numel(tc.raters.spatial);
  for (std::int64_t i = 0; i < n; ++i) {
    CHECK(tc.raters.masks[i] == tc.raters.masks[n + i]);
    CHECK(tc.raters.masks[i] == tc.raters.masks[2 * n + i]);
  }
  for (double v : rater_variance_map(tc.raters).data) CHECK(v == 0.0);
}

TEST_CASE("same seed is bit-identical, other seeds differ") {
  const auto spec = centered_spec(8.0, 2.0, 32);
  const ToyCase a = generate_toy_case(spec, 32, 42);
  const ToyCase b = generate_toy_case(spec, 32, 42);
  CHECK(a.image == b.image);
  CHECK(a.raters.masks == b.raters.masks);
  const ToyCase c = generate_toy_case(spec, 32, 43);
  CHECK(a.image != c.image);  // different background noise
  CHECK(a.raters.masks == c.raters.masks);  // masks are seed-free
}

TEST_CASE("image values stay in [0, 1] and track the intensity") {
  const auto spec = centered_spec(10.0, 2.0, 40);
  const ToyCase tc = generate_toy_case(spec, 40, 3);
  double lo = 1e9, hi = -1e9;
  for (double v : tc.image) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  // Center voxel sits deep inside: intensity minus at most noise clamp.
  const std::int64_t c = 19 * 40 * 40 + 19 * 40 + 19;
  CHECK(tc.image[c] > spec.intensity - 0.3);
}

TEST_CASE("objects that leave the frame are rejected unless marked ood") {
  ToyCaseSpec spec = centered_spec(10.0, 0.0, 32);
  spec.center = {5.0, 15.5, 15.5};
  try {
    generate_toy_case(spec, 32, 1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::OBJECT_OUT_OF_BOUNDS);
  }
  spec.ood = true;
  CHECK_NOTHROW(generate_toy_case(spec, 32, 1));
  CHECK_THROWS_AS(generate_toy_case(centered_spec(2.0, 0.0, 32), 32, 1),
                  const Error&);
}

TEST_CASE("shape shift swaps the sphere for a volume-matched cube") {
  const auto spec = centered_spec(9.0, 2.0, 48);
  const ToyCase cube = generate_shift_case(spec, ShiftKind::SHAPE, 48, 7);
  REQUIRE(cube.raters.raters == 1);  // single crisp ground truth
  const double v = static_cast<double>(volume(cube.raters, 0));

  // The cube half-edge preserves the analytic sphere volume; the voxelized
  // count is an exact per-axis integer window around the center.
  const double sphere_v = 4.0 * M_PI * 729.0 / 3.0;
  const double half_edge = 0.5 * std::cbrt(sphere_v);
  const double c = 23.5;
  const double axis =
      std::floor(c + half_edge) - std::ceil(c - half_edge) + 1.0;
  CHECK(v == axis * axis * axis);
  CHECK(v == doctest::Approx(sphere_v).epsilon(0.15));

  // Same spec without the shift: spherical mask of that same volume.
  const ToyCase sphere = generate_toy_case(centered_spec(9.0, 0.0, 48), 48, 7);
  CHECK(static_cast<double>(volume(sphere.raters, 2)) ==
        doctest::Approx(sphere_v).epsilon(0.03));
}

TEST_CASE("intensity shift draws below the training range") {
  const auto spec = centered_spec(9.0, 2.0, 48);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const ToyCase tc = generate_shift_case(spec, ShiftKind::INTENSITY, 48, seed);
    // Shifted cases render crisply, so the mean inside the mask recovers the
    // drawn gray value (noise averages out).
    const std::int64_t n = numel(tc.raters.spatial);
    double sum = 0.0;
    std::int64_t cnt = 0;
    for (std::int64_t i = 0; i < n; ++i)
      if (tc.raters.masks[i]) {
        sum += tc.image[i];
        ++cnt;
      }
    REQUIRE(cnt > 0);
    const double mean = sum / static_cast<double>(cnt);
    CHECK(mean > 0.30);
    CHECK(mean < 0.70);  // i.i.d. cases sit in [0.8, 1.0]
  }
}

TEST_CASE("position shift truncates the mask at the volume face") {
  const auto spec = centered_spec(9.0, 2.0, 48);
  const double full = 4.0 * M_PI * 729.0 / 3.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const ToyCase tc = generate_shift_case(spec, ShiftKind::POSITION, 48, seed);
    const double v = static_cast<double>(volume(tc.raters, 0));
    CHECK(v > 0.40 * full);
    CHECK(v < 0.97 * full);  // a nonzero fraction got cut off
  }
}

TEST_CASE("planned scenario counts, tags and shift rotation") {
  const ScenarioPlan plan = plan_scenario(ScenarioId::S3B, 11, 48, 10, 8);
  auto counts = role_counts(plan);
  CHECK(counts["train/iid"] == 200);
  CHECK(counts["blur/train"] == 100);
  CHECK(counts["val/iid"] == 10);
  CHECK(counts["blur/val"] == 5);  // mirrors the training proportion
  CHECK(counts["test/iid"] == 42);
  CHECK(counts["test/ood"] == 21);
  CHECK(counts["pool/iid"] == 4);
  CHECK(counts["pool/ood"] == 4);

  // The OoD test block cycles shape -> intensity -> position.
  std::vector<std::string> kinds;
  for (const auto& c : plan.cases)
    if (c.role == Role::TEST && c.split == Split::OOD) {
      REQUIRE(c.shift.has_value());
      kinds.emplace_back(to_string(*c.shift));
    }
  REQUIRE(kinds.size() == 21);
  CHECK(kinds[0] == "shape");
  CHECK(kinds[1] == "intensity");
  CHECK(kinds[2] == "position");
  CHECK(kinds[3] == "shape");
  CHECK(kinds[20] == "position");

  // Every case carries its scenario tag; ids are unique.
  std::vector<std::string> ids;
  for (const auto& c : plan.cases) {
    CHECK(c.tags.front() == "s3b");
    ids.push_back(c.case_id);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("scenarios without shifts get an all-iid pool") {
  const ScenarioPlan plan = plan_scenario(ScenarioId::S1, 3, 48, 0, 6);
  std::int64_t pool = 0;
  for (const auto& c : plan.cases)
    if (c.role == Role::POOL) {
      ++pool;
      CHECK(c.split == Split::IID);
    }
  CHECK(pool == 6);
}

TEST_CASE("plans are deterministic in the master seed") {
  const ScenarioPlan a = plan_scenario(ScenarioId::S2, 9, 48, 4, 4);
  const ScenarioPlan b = plan_scenario(ScenarioId::S2, 9, 48, 4, 4);
  REQUIRE(a.cases.size() == b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    CHECK(a.cases[i].case_id == b.cases[i].case_id);
    CHECK(a.cases[i].seed == b.cases[i].seed);
    CHECK(a.cases[i].spec.radius == b.cases[i].spec.radius);
    CHECK(a.cases[i].spec.center == b.cases[i].spec.center);
  }
  const ScenarioPlan c = plan_scenario(ScenarioId::S2, 10, 48, 4, 4);
  CHECK(a.cases[0].spec.radius != c.cases[0].spec.radius);
}

TEST_CASE("materialize without a shift is the plain generator") {
  ScenarioPlan plan = plan_scenario(ScenarioId::S1, 5, 32, 0, 0);
  const PlannedToyCase& pc = plan.cases.front();
  REQUIRE_FALSE(pc.shift.has_value());
  const ToyCase via_plan = materialize(pc, 32);
  const ToyCase direct = generate_toy_case(pc.spec, 32, pc.seed);
  CHECK(via_plan.image == direct.image);
  CHECK(via_plan.raters.masks == direct.raters.masks);
}

TEST_CASE("label ambiguity: identity, certainty and frequency") {
  LabelField labels;
  labels.spatial = {6};
  labels.data = {0, 1, 1, 2, 2, 2};

  const auto same = induce_label_ambiguity(labels, {{1, 2}}, 0.0, 3, 3);
  CHECK(same.data == labels.data);

  const auto flipped = induce_label_ambiguity(labels, {{1, 2}}, 1.0, 3, 3);
  CHECK(flipped.data == std::vector<std::uint8_t>{0, 2, 2, 2, 2, 2});

  CHECK_THROWS_AS(induce_label_ambiguity(labels, {{1, 3}}, 0.5, 3, 3),
                  const Error&);
  CHECK_THROWS_AS(induce_label_ambiguity(labels, {{1, 2}}, 1.5, 3, 3),
                  const Error&);

  // Monte-Carlo frequency of whole-structure flips at p = 1/3.
  std::int64_t flips = 0;
  const std::int64_t trials = 3000;
  for (std::int64_t t = 0; t < trials; ++t) {
    const auto out = induce_label_ambiguity(labels, {{1, 2}}, 1.0 / 3.0,
                                            static_cast<std::uint64_t>(t), 3);
    if (out.data[1] == 2) ++flips;
  }
  const double freq = static_cast<double>(flips) / trials;
  CHECK(freq == doctest::Approx(1.0 / 3.0).epsilon(0.09));
}

TEST_CASE("planned case seeds differ between cases") {
  const ScenarioPlan plan = plan_scenario(ScenarioId::S1, 7, 48, 2, 0);
  CHECK(plan.cases[0].seed != plan.cases[1].seed);
  CHECK(plan.cases[0].seed != plan.cases[2].seed);
}

TEST_CASE("build_scenario materializes the whole plan") {
  const auto records = build_scenario(ScenarioId::S1, 7, 32, 1, 0);
  CHECK(records.size() == 221);
  for (const auto& rec : records) {
    CHECK(rec.spatial == std::vector<std::int64_t>{32, 32, 32});
    CHECK(rec.image.size() == 32 * 32 * 32);
    REQUIRE(rec.raters.has_value());
    CHECK(rec.raters->raters == 3);
  }
}

TEST_CASE("radius 12 objects need a volume edge of at least 30") {
  CHECK_THROWS_AS(plan_scenario(ScenarioId::S1, 1, 24, 0, 0), const Error&);
}
