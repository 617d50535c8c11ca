#pragma once

#include <array>
#include <map>

#include "uqseg/aggregation.hpp"
#include "uqseg/simulate.hpp"
#include "uqseg/toygen.hpp"
#include "uqseg/types.hpp"

namespace uqseg {

// The evaluation grid: which model families, which aggregations, which
// seeds. Measures per family come from semantics_for; thresholds for the
// threshold-mean aggregation are fitted on validation cases per cell.
struct StudyGrid {
  std::vector<ModelFamily> families;
  std::vector<AggregationSpec> aggregations;
  std::vector<std::uint64_t> seeds;
  SimulatorConfig base_sim;  // family/seed/n_samples overridden per cell
};

void validate_grid(const StudyGrid& grid);

struct DownstreamOptions {
  // Replaces failure-detection confidences with the oracle (-risk); only
  // useful for checking that the excess-AURC column collapses to zero.
  bool fd_oracle_confidence = false;
  std::int64_t ace_bins = 10;
  std::int64_t calib_max_pixels = 1000000;
  // Externally supplied segmentation scores from an actual retraining round,
  // keyed by family name: {method_t1, method_t2, random_t1, random_t2}.
  std::map<std::string, std::array<double, 4>> al_dice;
};

struct ReportRow {
  std::string scenario;     // "s1".."s3b" or "-"
  std::string task;
  std::string family;
  std::string measure;      // "-" where not applicable
  std::string claimed_type; // "-" where not applicable
  std::string aggregation;  // "-" for pixel-level tasks
  std::string split;        // "iid", "ood", or "-"
  std::uint64_t seed = 0;
  double value = 0.0;
  std::string note;
};

struct StudyReport {
  std::vector<ReportRow> rows;
};

// Canonical row order so identical runs serialize byte-identically.
void sort_report(StudyReport& report);

// Q1/Q2: per (family, measure) the NCC between the uncertainty map and the
// rater-variance reference, averaged over i.i.d. test cases of scenarios
// with rater disagreement. Q3/Q4: AUROC of aggregated scores separating
// i.i.d. from OoD test cases on the shift scenarios.
StudyReport run_separation_study(
    const std::map<ScenarioId, std::vector<CaseRecord>>& scenarios,
    const StudyGrid& grid);

// The five downstream tasks over one scenario's cases: OoD detection
// (AUROC), failure detection (AURC / excess AURC per split), active-learning
// query scoring, calibration (ACE after Platt scaling), and ambiguity
// modeling (NCC + GED, pixel-level).
StudyReport run_downstream_eval(const std::vector<CaseRecord>& cases,
                                const StudyGrid& grid,
                                const DownstreamOptions& opts,
                                const std::string& scenario_label);

// Top half of the pool (ceil(N/2)) by descending score, ties broken by
// case_id ascending.
std::vector<std::string> al_query_selection(
    const std::vector<std::pair<std::string, double>>& pool_scores);

enum class Component { FAMILY, MEASURE_TYPE, AGGREGATION };

std::string_view to_string(Component c);
Component component_from_string(std::string_view s);

struct ComponentImprovement {
  std::string value;         // e.g. "ttd", "eu", "patch_max"
  double improvement = 0.0;  // mean over the flattened rows minus grand mean
  double sd = 0.0;           // spread across those flattened rows
  std::int64_t count = 0;
};

// Per-component improvement over the task's grand mean, flattening all
// other components and seeds. Lower-is-better metrics are negated first so
// positive always means better; task-unsuited claimed types are dropped
// (AU has no business ranking OoD detection or query selection).
std::vector<ComponentImprovement> component_improvement_aggregate(
    const StudyReport& report, Component component, const std::string& task);

// True when smaller raw values of the task's metric are better.
bool lower_is_better(const std::string& task);

struct SummaryRow {
  std::string scenario, task, family, measure, claimed_type, aggregation,
      split;
  double mean = 0.0;
  double sd = 0.0;
  std::int64_t n = 0;  // seeds aggregated
};

// Mean/sd over seeds for every remaining key combination.
std::vector<SummaryRow> summarize_report(const StudyReport& report);

}  // namespace uqseg
