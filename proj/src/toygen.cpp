#include "uqseg/toygen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "uqseg/rng.hpp"

namespace uqseg {
namespace {

constexpr double kRater1VolumeRatio = 0.10;
constexpr double kRater2VolumeRatio = 0.55;
constexpr double kRadiusLo = 6.0, kRadiusHi = 12.0;
constexpr double kBlurLo = 1.5, kBlurHi = 3.0;
constexpr double kIntensityLo = 0.8, kIntensityHi = 1.0;
constexpr double kOodIntensityLo = 0.35, kOodIntensityHi = 0.65;
constexpr double kNoiseSd = 0.05;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double cube_half_edge(double radius) {
  return 0.5 * std::cbrt(4.0 * M_PI * radius * radius * radius / 3.0);
}

bool inside_object(const ToyCaseSpec& spec, double scale, double z, double y,
                   double x) {
  const double dz = z - spec.center[0];
  const double dy = y - spec.center[1];
  const double dx = x - spec.center[2];
  if (spec.object == ToyObject::SPHERE) {
    const double r = spec.radius * scale;
    return dz * dz + dy * dy + dx * dx <= r * r;
  }
  const double h = cube_half_edge(spec.radius) * scale;
  return std::abs(dz) <= h && std::abs(dy) <= h && std::abs(dx) <= h;
}

void check_bounds(const ToyCaseSpec& spec, std::int64_t edge) {
  if (spec.ood) return;  // position shifts may leave the frame on purpose
  const double reach = spec.object == ToyObject::SPHERE
                           ? spec.radius
                           : cube_half_edge(spec.radius);
  for (double c : spec.center)
    if (c - reach < 0.0 || c + reach > static_cast<double>(edge - 1))
      throw Error(Err::OBJECT_OUT_OF_BOUNDS, "object does not fit the volume");
}

LabelField object_mask(const ToyCaseSpec& spec, std::int64_t edge,
                       double scale) {
  LabelField f;
  f.spatial = {edge, edge, edge};
  f.data.assign(edge * edge * edge, 0);
  std::int64_t idx = 0;
  for (std::int64_t z = 0; z < edge; ++z)
    for (std::int64_t y = 0; y < edge; ++y)
      for (std::int64_t x = 0; x < edge; ++x, ++idx)
        f.data[idx] = inside_object(spec, scale, static_cast<double>(z),
                                    static_cast<double>(y),
                                    static_cast<double>(x));
  return f;
}

// Object rendered into the image: a crisp step for blur 0, otherwise a
// blurred radial edge centered between the innermost and outermost rater
// radii (a Gaussian-smoothed step evaluated analytically).
std::vector<double> render_image(const ToyCaseSpec& spec, std::int64_t edge,
                                 SplitRng& noise_rng) {
  const std::int64_t n = edge * edge * edge;
  std::vector<double> img(n, 0.0);
  const double r1 = spec.radius * std::cbrt(kRater1VolumeRatio);
  const double r_mid = 0.5 * (r1 + spec.radius);

  std::int64_t idx = 0;
  for (std::int64_t z = 0; z < edge; ++z)
    for (std::int64_t y = 0; y < edge; ++y)
      for (std::int64_t x = 0; x < edge; ++x, ++idx) {
        if (spec.blur_sigma > 0.0) {
          const double dz = static_cast<double>(z) - spec.center[0];
          const double dy = static_cast<double>(y) - spec.center[1];
          const double dx = static_cast<double>(x) - spec.center[2];
          const double d = std::sqrt(dz * dz + dy * dy + dx * dx);
          img[idx] = spec.intensity *
                     normal_cdf((r_mid - d) / spec.blur_sigma);
        } else if (inside_object(spec, 1.0, static_cast<double>(z),
                                 static_cast<double>(y),
                                 static_cast<double>(x))) {
          img[idx] = spec.intensity;
        }
      }

  for (std::int64_t i = 0; i < n; ++i) {
    img[i] += noise_rng.next_normal() * spec.background_noise_sd;
    img[i] = std::clamp(img[i], 0.0, 1.0);
  }
  return img;
}

RaterSet stack_masks(const std::vector<LabelField>& masks) {
  RaterSet r;
  r.raters = static_cast<std::int64_t>(masks.size());
  r.spatial = masks.front().spatial;
  r.masks.reserve(r.raters * numel(r.spatial));
  for (const auto& m : masks)
    r.masks.insert(r.masks.end(), m.data.begin(), m.data.end());
  return r;
}

ToyCaseSpec sample_spec(SplitRng& rng, bool blurred, std::int64_t edge) {
  ToyCaseSpec spec;
  spec.radius = rng.uniform(kRadiusLo, kRadiusHi);
  const double margin = std::ceil(spec.radius) + 2.0;
  const double hi = static_cast<double>(edge - 1) - margin;
  if (hi <= margin)
    throw Error(Err::OBJECT_OUT_OF_BOUNDS, "volume too small for the object");
  for (double& c : spec.center) c = rng.uniform(margin, hi);
  spec.intensity = rng.uniform(kIntensityLo, kIntensityHi);
  spec.blur_sigma = blurred ? rng.uniform(kBlurLo, kBlurHi) : 0.0;
  spec.background_noise_sd = kNoiseSd;
  return spec;
}

std::string case_name(ScenarioId id, const char* group, std::int64_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%s-%04lld", std::string(to_string(id)).c_str(),
                group, static_cast<long long>(i + 1));
  return buf;
}

}  // namespace

std::string_view to_string(ScenarioId s) {
  switch (s) {
    case ScenarioId::S1: return "s1";
    case ScenarioId::S2: return "s2";
    case ScenarioId::S3A: return "s3a";
    case ScenarioId::S3B: return "s3b";
  }
  return "?";
}

std::string_view to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::SHAPE: return "shape";
    case ShiftKind::INTENSITY: return "intensity";
    case ShiftKind::POSITION: return "position";
  }
  return "?";
}

ScenarioId scenario_from_string(std::string_view s) {
  if (s == "s1") return ScenarioId::S1;
  if (s == "s2") return ScenarioId::S2;
  if (s == "s3a") return ScenarioId::S3A;
  if (s == "s3b") return ScenarioId::S3B;
  throw Error(Err::MISSING_SCENARIO, "unknown scenario: " + std::string(s));
}

ShiftKind shift_from_string(std::string_view s) {
  if (s == "shape") return ShiftKind::SHAPE;
  if (s == "intensity") return ShiftKind::INTENSITY;
  if (s == "position") return ShiftKind::POSITION;
  throw Error(Err::CONFIG_INVALID, "unknown shift: " + std::string(s));
}

ToyScenario scenario_table(ScenarioId id) {
  switch (id) {
    case ScenarioId::S1: return {id, 200, 200, 20, 20, 0};
    case ScenarioId::S2: return {id, 200, 0, 21, 0, 21};
    case ScenarioId::S3A: return {id, 200, 100, 21, 0, 21};
    case ScenarioId::S3B: return {id, 200, 100, 42, 21, 21};
  }
  throw Error(Err::MISSING_SCENARIO, "unknown scenario id");
}

ToyCase generate_toy_case(const ToyCaseSpec& spec, std::int64_t volume_edge,
                          std::uint64_t seed) {
  if (spec.radius < 3.0)
    throw Error(Err::CONFIG_INVALID, "radius must be at least 3 voxels");
  check_bounds(spec, volume_edge);

  ToyCase out;
  out.spatial = {volume_edge, volume_edge, volume_edge};
  SplitRng noise = SplitRng(seed).child("noise");
  out.image = render_image(spec, volume_edge, noise);

  if (spec.blur_sigma > 0.0) {
    const double s1 = std::cbrt(kRater1VolumeRatio);
    const double s2 = std::cbrt(kRater2VolumeRatio);
    out.raters = stack_masks({object_mask(spec, volume_edge, s1),
                              object_mask(spec, volume_edge, s2),
                              object_mask(spec, volume_edge, 1.0)});
  } else {
    LabelField crisp = object_mask(spec, volume_edge, 1.0);
    out.raters = stack_masks({crisp, crisp, crisp});
  }
  return out;
}

ToyCase generate_shift_case(const ToyCaseSpec& base_spec, ShiftKind shift,
                            std::int64_t volume_edge, std::uint64_t seed) {
  ToyCaseSpec spec = base_spec;
  spec.blur_sigma = 0.0;  // shifted cases have one crisp ground truth
  spec.ood = true;
  SplitRng rng(seed);

  switch (shift) {
    case ShiftKind::SHAPE:
      spec.object = ToyObject::CUBE;
      break;
    case ShiftKind::INTENSITY: {
      SplitRng r = rng.child("shift-intensity");
      spec.intensity = r.uniform(kOodIntensityLo, kOodIntensityHi);
      break;
    }
    case ShiftKind::POSITION: {
      SplitRng r = rng.child("shift-position");
      const std::uint64_t axis = r.next_below(3);
      const bool high_side = r.bernoulli(0.5);
      const double frac = r.uniform(0.1, 0.7);
      spec.center[axis] = high_side
                              ? static_cast<double>(volume_edge - 1) -
                                    frac * spec.radius
                              : frac * spec.radius;
      break;
    }
  }

  ToyCase out;
  out.spatial = {volume_edge, volume_edge, volume_edge};
  SplitRng noise = rng.child("noise");
  check_bounds(spec, volume_edge);
  out.image = render_image(spec, volume_edge, noise);
  out.raters = stack_masks({object_mask(spec, volume_edge, 1.0)});
  return out;
}

ScenarioPlan plan_scenario(ScenarioId id, std::uint64_t master_seed,
                           std::int64_t volume_edge, std::int64_t n_val,
                           std::int64_t n_pool) {
  const ToyScenario t = scenario_table(id);
  ScenarioPlan plan;
  plan.id = id;
  plan.volume_edge = volume_edge;
  std::int64_t index = 0;

  auto add = [&](const std::string& case_id, Split split, Role role,
                 bool blurred, std::optional<ShiftKind> shift) {
    PlannedToyCase c;
    c.case_id = case_id;
    c.split = split;
    c.role = role;
    c.seed = derive_seed(master_seed, index++);
    SplitRng spec_rng = SplitRng(c.seed).child("spec");
    c.spec = sample_spec(spec_rng, blurred, volume_edge);
    c.spec.ood = split == Split::OOD;
    c.shift = shift;
    c.tags.emplace_back(to_string(id));
    if (blurred) c.tags.emplace_back("blur");
    if (shift) c.tags.emplace_back("shift:" + std::string(to_string(*shift)));
    plan.cases.push_back(std::move(c));
  };

  for (std::int64_t i = 0; i < t.n_train; ++i)
    add(case_name(id, "train", i), Split::IID, Role::TRAIN, i < t.n_train_blur,
        std::nullopt);

  // Validation mirrors the training blur proportion.
  const std::int64_t n_val_blur =
      t.n_train == 0 ? 0 : (n_val * t.n_train_blur + t.n_train / 2) / t.n_train;
  for (std::int64_t i = 0; i < n_val; ++i)
    add(case_name(id, "val", i), Split::IID, Role::VAL, i < n_val_blur,
        std::nullopt);

  for (std::int64_t i = 0; i < t.n_test_iid; ++i)
    add(case_name(id, "test-iid", i), Split::IID, Role::TEST,
        i < t.n_test_iid_blur, std::nullopt);

  constexpr ShiftKind kRotation[3] = {ShiftKind::SHAPE, ShiftKind::INTENSITY,
                                      ShiftKind::POSITION};
  for (std::int64_t i = 0; i < t.n_test_ood; ++i)
    add(case_name(id, "test-ood", i), Split::OOD, Role::TEST, false,
        kRotation[i % 3]);

  // Pool cases alternate i.i.d. and shifted so query selection has
  // something to find; scenarios without shifts get an all-i.i.d. pool.
  const bool has_shifts = t.n_test_ood > 0;
  for (std::int64_t i = 0; i < n_pool; ++i) {
    const bool shifted = has_shifts && i % 2 == 1;
    if (shifted)
      add(case_name(id, "pool", i), Split::OOD, Role::POOL, false,
          kRotation[(i / 2) % 3]);
    else
      add(case_name(id, "pool", i), Split::IID, Role::POOL,
          t.n_train > 0 && (i / 2) % 2 == 0 && t.n_train_blur > 0,
          std::nullopt);
  }

  return plan;
}

ToyCase materialize(const PlannedToyCase& planned, std::int64_t volume_edge) {
  if (planned.shift)
    return generate_shift_case(planned.spec, *planned.shift, volume_edge,
                               planned.seed);
  return generate_toy_case(planned.spec, volume_edge, planned.seed);
}

std::vector<CaseRecord> build_scenario(ScenarioId id, std::uint64_t master_seed,
                                       std::int64_t volume_edge,
                                       std::int64_t n_val,
                                       std::int64_t n_pool) {
  ScenarioPlan plan = plan_scenario(id, master_seed, volume_edge, n_val, n_pool);
  std::vector<CaseRecord> records;
  records.reserve(plan.cases.size());
  for (const auto& p : plan.cases) {
    ToyCase tc = materialize(p, volume_edge);
    CaseRecord rec;
    rec.case_id = p.case_id;
    rec.split = p.split;
    rec.role = p.role;
    rec.scenario_tags = p.tags;
    rec.spatial = tc.spatial;
    rec.image = std::move(tc.image);
    rec.raters = std::move(tc.raters);
    records.push_back(std::move(rec));
  }
  return records;
}

LabelField induce_label_ambiguity(
    const LabelField& labels,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& flip_pairs,
    double p, std::uint64_t seed, std::int64_t n_classes) {
  if (p < 0.0 || p > 1.0)
    throw Error(Err::CONFIG_INVALID, "flip probability outside [0, 1]");
  for (const auto& [from, to] : flip_pairs)
    if (from < 0 || from >= n_classes || to < 0 || to >= n_classes)
      throw Error(Err::UNKNOWN_CLASS, "flip pair references an unknown class");

  LabelField out = labels;
  SplitRng rng(seed);
  for (const auto& [from, to] : flip_pairs) {
    const bool flip = rng.bernoulli(p);  // drawn per pair, present or not
    if (!flip) continue;
    for (std::uint8_t& v : out.data)
      if (v == from) v = static_cast<std::uint8_t>(to);
  }
  return out;
}

}  // namespace uqseg
