#pragma once

#include <array>
#include <optional>

#include "uqseg/types.hpp"

namespace uqseg {

enum class ScenarioId { S1, S2, S3A, S3B };
enum class ToyObject { SPHERE, CUBE };
enum class ShiftKind { SHAPE, INTENSITY, POSITION };

std::string_view to_string(ScenarioId s);
std::string_view to_string(ShiftKind k);
ScenarioId scenario_from_string(std::string_view s);
ShiftKind shift_from_string(std::string_view s);

// Case counts per scenario; the parenthesized blur counts of the source
// table appear as *_blur fields.
struct ToyScenario {
  ScenarioId id = ScenarioId::S1;
  std::int64_t n_train = 0;
  std::int64_t n_train_blur = 0;
  std::int64_t n_test_iid = 0;
  std::int64_t n_test_iid_blur = 0;
  std::int64_t n_test_ood = 0;
};

ToyScenario scenario_table(ScenarioId id);

struct ToyCaseSpec {
  ToyObject object = ToyObject::SPHERE;
  // For CUBE this still holds the equivalent-sphere radius; the cube edge is
  // derived as (4*pi*r^3/3)^(1/3) so shape shifts preserve volume.
  double radius = 9.0;
  std::array<double, 3> center{24.0, 24.0, 24.0};
  double intensity = 0.9;
  double blur_sigma = 0.0;  // > 0 marks an ambiguous (multi-rater) case
  double background_noise_sd = 0.05;
  bool ood = false;
};

struct ToyCase {
  std::vector<std::int64_t> spatial;
  std::vector<double> image;
  RaterSet raters;
};

// Ambiguous sphere with three nested raters at 10% / 55% / 100% of the
// rater-3 volume. blur_sigma = 0 collapses all raters onto the crisp mask.
ToyCase generate_toy_case(const ToyCaseSpec& spec, std::int64_t volume_edge,
                          std::uint64_t seed);

// Distribution-shifted case with a single crisp rater: SHAPE swaps the
// sphere for an equal-volume cube, INTENSITY resamples the gray value
// outside the training range, POSITION places the object partially out of
// frame.
ToyCase generate_shift_case(const ToyCaseSpec& base_spec, ShiftKind shift,
                            std::int64_t volume_edge, std::uint64_t seed);

// One planned case: everything needed to materialize it on demand.
struct PlannedToyCase {
  std::string case_id;
  Split split = Split::IID;
  Role role = Role::TRAIN;
  ToyCaseSpec spec;
  std::optional<ShiftKind> shift;
  std::uint64_t seed = 0;
  std::vector<std::string> tags;
};

struct ScenarioPlan {
  ScenarioId id = ScenarioId::S1;
  std::int64_t volume_edge = 48;
  std::vector<PlannedToyCase> cases;
};

// Deterministic case list (specs sampled, nothing materialized). `n_val`
// appends held-out validation cases drawn like training cases, and `n_pool`
// appends unlabeled-pool cases (alternating i.i.d./shifted on scenarios
// that have shifts) for query-selection experiments; the scenario table
// itself has neither column.
ScenarioPlan plan_scenario(ScenarioId id, std::uint64_t master_seed,
                           std::int64_t volume_edge = 48,
                           std::int64_t n_val = 0, std::int64_t n_pool = 0);

ToyCase materialize(const PlannedToyCase& planned, std::int64_t volume_edge);

// Full scenario as in-memory case records (stacks left empty).
std::vector<CaseRecord> build_scenario(ScenarioId id, std::uint64_t master_seed,
                                       std::int64_t volume_edge = 48,
                                       std::int64_t n_val = 0,
                                       std::int64_t n_pool = 0);

// With probability p per listed (from, to) pair, relabels every pixel of
// `from` to `to` — whole-structure flips, one Bernoulli draw per pair.
LabelField induce_label_ambiguity(
    const LabelField& labels,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& flip_pairs,
    double p, std::uint64_t seed, std::int64_t n_classes);

}  // namespace uqseg
