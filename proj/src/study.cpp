#include "uqseg/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "uqseg/measures.hpp"
#include "uqseg/metrics.hpp"
#include "uqseg/rng.hpp"

namespace uqseg {
namespace {

std::string agg_name(const AggregationSpec& spec) {
  return std::string(to_string(spec.strategy));
}

SimulatorConfig cell_config(const StudyGrid& grid, ModelFamily family,
                            std::uint64_t seed) {
  SimulatorConfig cfg = grid.base_sim;
  cfg.family = family;
  cfg.n_samples = family == ModelFamily::DETERMINISTIC ? 1 : grid.base_sim.n_samples;
  // Distinct noise stream per family so e.g. two ensembles of the same size
  // do not produce bit-identical samples.
  cfg.seed = SplitRng(seed).child(to_string(family)).next_u64();
  return cfg;
}

LabelField argmax_mask(const MeanPrediction& mp) {
  LabelField f;
  f.spatial = mp.spatial;
  f.data = mp.argmax;
  return f;
}

// Majority vote across raters (>= half positive counts as positive).
LabelField majority_mask(const RaterSet& raters) {
  LabelField f;
  f.spatial = raters.spatial;
  const std::int64_t v = raters.voxels();
  f.data.assign(v, 0);
  for (std::int64_t p = 0; p < v; ++p) {
    std::int64_t k = 0;
    for (std::int64_t r = 0; r < raters.raters; ++r)
      k += raters.masks[r * v + p] == 1;
    f.data[p] = 2 * k >= raters.raters;
  }
  return f;
}

std::vector<LabelField> sample_masks(const ProbabilityStack& st) {
  const std::int64_t v = st.voxels();
  std::vector<LabelField> out;
  out.reserve(st.samples);
  for (std::int64_t s = 0; s < st.samples; ++s) {
    LabelField f;
    f.spatial = st.spatial;
    f.data.assign(v, 0);
    for (std::int64_t p = 0; p < v; ++p) {
      std::int64_t best = 0;
      double best_val = st.at(s, 0, p);
      for (std::int64_t c = 1; c < st.classes; ++c) {
        const double val = st.at(s, c, p);
        if (val > best_val) {
          best_val = val;
          best = c;
        }
      }
      f.data[p] = static_cast<std::uint8_t>(best);
    }
    out.push_back(std::move(f));
  }
  return out;
}

struct CalibPool {
  std::vector<double> score;
  std::vector<int> correct;
  std::int64_t seen = 0;
};

// Reservoir sampling keeps the pixel pools bounded and deterministic.
void reservoir_push(CalibPool& pool, double s, int c, std::int64_t cap,
                    SplitRng& rng) {
  ++pool.seen;
  if (static_cast<std::int64_t>(pool.score.size()) < cap) {
    pool.score.push_back(s);
    pool.correct.push_back(c);
    return;
  }
  const std::uint64_t j = rng.next_below(static_cast<std::uint64_t>(pool.seen));
  if (static_cast<std::int64_t>(j) < cap) {
    pool.score[j] = s;
    pool.correct[j] = c;
  }
}

struct CaseScores {
  std::string id;
  Split split = Split::IID;
  Role role = Role::TEST;
  double risk = 0.0;
  bool has_risk = false;
  std::map<Measure, std::vector<double>> agg_scores;  // per aggregation index
  std::map<Measure, NccResult> ncc_vs_raters;         // i.i.d. TEST only
  double ged_value = 0.0;
  bool has_ged = false;
};

struct CellEvaluation {
  std::vector<CaseScores> cases;
  std::map<Measure, CalibPool> calib_val, calib_test;
  std::map<Measure, double> thresholds;
  bool thresholds_ready = false;
};

// Cases carrying a ready-made stack (externally supplied predictions) keep
// it; everything else gets a simulated one.
ProbabilityStack case_stack(const CaseRecord& rec, const SimulatorConfig& cfg) {
  if (rec.stack) return *rec.stack;
  return simulate_for_family(rec, cfg);
}

// One full pass over a case list for a fixed (family, seed): simulate every
// VAL/TEST/POOL case and collect everything any task downstream needs.
CellEvaluation evaluate_cell(const std::vector<CaseRecord>& cases,
                             const StudyGrid& grid, ModelFamily family,
                             std::uint64_t seed, bool downstream,
                             const DownstreamOptions& opts) {
  const SimulatorConfig cfg = cell_config(grid, family, seed);
  const MeasureSemantics sem = semantics_for(family);
  bool need_threshold = false;
  for (const auto& a : grid.aggregations)
    need_threshold |= a.strategy == Aggregation::THRESHOLD_MEAN;

  CellEvaluation ev;
  SplitRng calib_rng = SplitRng(seed).child("calib").child(to_string(family));

  // Validation pass: pools the threshold quantile input and, for the
  // calibration task, the Platt-scaling pixel sample.
  std::map<Measure, std::vector<UncertaintyMap>> val_maps;
  std::vector<LabelField> val_masks;
  for (const auto& rec : cases) {
    if (rec.role != Role::VAL) continue;
    ProbabilityStack st = case_stack(rec, cfg);
    MeanPrediction mp = mean_prediction(st);
    LabelField pred = argmax_mask(mp);
    std::optional<LabelField> ref;
    if (downstream && rec.raters) ref = majority_mask(*rec.raters);
    for (const auto& [m, type] : sem.mapping) {
      UncertaintyMap u = compute_measure(st, m, family);
      if (ref) {
        CalibPool& pool = ev.calib_val[m];
        for (std::size_t p = 0; p < u.data.size(); ++p)
          reservoir_push(pool, -u.data[p], pred.data[p] == ref->data[p],
                         opts.calib_max_pixels, calib_rng);
      }
      if (need_threshold) val_maps[m].push_back(std::move(u));
    }
    if (need_threshold) val_masks.push_back(std::move(pred));
  }
  if (need_threshold && !val_masks.empty()) {
    for (auto& [m, maps] : val_maps)
      ev.thresholds[m] = compute_threshold(maps, val_masks);
    ev.thresholds_ready = true;
  }

  for (const auto& rec : cases) {
    if (rec.role != Role::TEST && rec.role != Role::POOL) continue;
    ProbabilityStack st = case_stack(rec, cfg);
    CaseScores cs;
    cs.id = rec.case_id;
    cs.split = rec.split;
    cs.role = rec.role;
    if (rec.raters) {
      cs.risk = 1.0 - mean_rater_dice(st, *rec.raters);
      cs.has_risk = true;
    }

    const bool iid_test = rec.role == Role::TEST && rec.split == Split::IID;
    std::optional<UncertaintyMap> ref_var;
    if (iid_test && rec.raters && rec.raters->raters >= 2)
      ref_var = rater_variance_map(*rec.raters);
    std::optional<LabelField> pred, ref;
    if (downstream && iid_test && rec.raters) {
      pred = argmax_mask(mean_prediction(st));
      ref = majority_mask(*rec.raters);
    }

    for (const auto& [m, type] : sem.mapping) {
      UncertaintyMap u = compute_measure(st, m, family);
      std::vector<double>& scores = cs.agg_scores[m];
      for (const auto& a : grid.aggregations) {
        AggregationSpec spec = a;
        if (spec.strategy == Aggregation::THRESHOLD_MEAN) {
          if (!ev.thresholds_ready)
            throw Error(Err::EMPTY_VALIDATION,
                        "threshold_mean aggregation needs validation cases");
          spec.threshold = ev.thresholds[m];
        }
        scores.push_back(aggregate(u, spec));
      }
      if (ref_var) cs.ncc_vs_raters[m] = ncc(u, *ref_var);
      if (pred) {
        CalibPool& pool = ev.calib_test[m];
        for (std::size_t p = 0; p < u.data.size(); ++p)
          reservoir_push(pool, -u.data[p], pred->data[p] == ref->data[p],
                         opts.calib_max_pixels, calib_rng);
      }
    }

    if (downstream && iid_test && rec.raters) {
      std::vector<LabelField> preds = sample_masks(st);
      std::vector<LabelField> refs;
      for (std::int64_t r = 0; r < rec.raters->raters; ++r)
        refs.push_back(rec.raters->mask(r));
      const std::uint64_t gseed =
          SplitRng(seed).child("ged").child(rec.case_id).next_u64();
      cs.ged_value = ged(preds, refs, 1, gseed);
      cs.has_ged = true;
    }
    ev.cases.push_back(std::move(cs));
  }
  return ev;
}

ReportRow base_row(const std::string& scenario, const std::string& task,
                   ModelFamily family, std::uint64_t seed) {
  ReportRow row;
  row.scenario = scenario;
  row.task = task;
  row.family = to_string(family);
  row.measure = "-";
  row.claimed_type = "-";
  row.aggregation = "-";
  row.split = "-";
  row.seed = seed;
  return row;
}

// NCC of each measure against the rater-variance reference, averaged over
// the i.i.d. test cases that actually show rater disagreement.
void emit_ncc_rows(StudyReport& rep, const CellEvaluation& ev,
                   const std::string& scenario, const std::string& task,
                   ModelFamily family, std::uint64_t seed) {
  for (const auto& [m, type] : semantics_for(family).mapping) {
    double sum = 0.0;
    std::int64_t valid = 0, excluded = 0;
    for (const auto& cs : ev.cases) {
      auto it = cs.ncc_vs_raters.find(m);
      if (it == cs.ncc_vs_raters.end()) continue;
      if (it->second.zero_variance) {
        ++excluded;
        continue;
      }
      sum += it->second.value;
      ++valid;
    }
    if (valid == 0) continue;
    ReportRow row = base_row(scenario, task, family, seed);
    row.measure = to_string(m);
    row.claimed_type = to_string(type);
    row.split = "iid";
    row.value = sum / static_cast<double>(valid);
    if (excluded > 0) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "excluded_zero_variance=%lld",
                    static_cast<long long>(excluded));
      row.note = buf;
    }
    rep.rows.push_back(std::move(row));
  }
}

// AUROC of aggregated image scores separating i.i.d. from OoD test cases.
void emit_ood_auroc_rows(StudyReport& rep, const CellEvaluation& ev,
                         const StudyGrid& grid, const std::string& scenario,
                         const std::string& task, ModelFamily family,
                         std::uint64_t seed) {
  for (const auto& [m, type] : semantics_for(family).mapping) {
    for (std::size_t a = 0; a < grid.aggregations.size(); ++a) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& cs : ev.cases) {
        if (cs.role != Role::TEST) continue;
        auto it = cs.agg_scores.find(m);
        if (it == cs.agg_scores.end()) continue;
        scores.push_back(it->second[a]);
        labels.push_back(cs.split == Split::OOD ? 1 : 0);
      }
      const bool has_pos = std::count(labels.begin(), labels.end(), 1) > 0;
      const bool has_neg = std::count(labels.begin(), labels.end(), 0) > 0;
      if (!has_pos || !has_neg) continue;
      ReportRow row = base_row(scenario, task, family, seed);
      row.measure = to_string(m);
      row.claimed_type = to_string(type);
      row.aggregation = agg_name(grid.aggregations[a]);
      row.value = auroc(scores, labels);
      rep.rows.push_back(std::move(row));
    }
  }
}

}  // namespace

void validate_grid(const StudyGrid& grid) {
  if (grid.families.empty() || grid.aggregations.empty() || grid.seeds.empty())
    throw Error(Err::CONFIG_INVALID, "study grid must not be empty");
  std::set<Aggregation> seen;
  for (const auto& a : grid.aggregations) {
    if (a.window_edge < 1)
      throw Error(Err::CONFIG_INVALID, "window edge must be at least 1");
    if (!seen.insert(a.strategy).second)
      throw Error(Err::CONFIG_INVALID, "duplicate aggregation strategy in grid");
  }
}

void sort_report(StudyReport& report) {
  std::sort(report.rows.begin(), report.rows.end(),
            [](const ReportRow& a, const ReportRow& b) {
              return std::tie(a.scenario, a.task, a.family, a.measure,
                              a.aggregation, a.split, a.seed) <
                     std::tie(b.scenario, b.task, b.family, b.measure,
                              b.aggregation, b.split, b.seed);
            });
}

StudyReport run_separation_study(
    const std::map<ScenarioId, std::vector<CaseRecord>>& scenarios,
    const StudyGrid& grid) {
  validate_grid(grid);
  if (scenarios.empty())
    throw Error(Err::MISSING_SCENARIO, "separation study needs scenarios");

  StudyReport rep;
  for (const auto& [sid, cases] : scenarios) {
    const std::string label(to_string(sid));
    for (ModelFamily family : grid.families) {
      for (std::uint64_t seed : grid.seeds) {
        CellEvaluation ev =
            evaluate_cell(cases, grid, family, seed, false, DownstreamOptions{});
        emit_ncc_rows(rep, ev, label, "separation_ncc", family, seed);
        emit_ood_auroc_rows(rep, ev, grid, label, "separation_auroc", family,
                            seed);
      }
    }
  }
  sort_report(rep);
  return rep;
}

StudyReport run_downstream_eval(const std::vector<CaseRecord>& cases,
                                const StudyGrid& grid,
                                const DownstreamOptions& opts,
                                const std::string& scenario_label) {
  validate_grid(grid);
  const bool has_iid_test =
      std::any_of(cases.begin(), cases.end(), [](const CaseRecord& r) {
        return r.role == Role::TEST && r.split == Split::IID;
      });
  if (!has_iid_test)
    throw Error(Err::MISSING_SPLIT, "downstream evaluation needs i.i.d. test cases");

  StudyReport rep;
  for (ModelFamily family : grid.families) {
    const MeasureSemantics sem = semantics_for(family);
    for (std::uint64_t seed : grid.seeds) {
      CellEvaluation ev = evaluate_cell(cases, grid, family, seed, true, opts);

      emit_ood_auroc_rows(rep, ev, grid, scenario_label, "ood_d_auroc", family,
                          seed);

      // Failure detection: risk = 1 - mean rater Dice, confidence = the
      // negated aggregated uncertainty (or the oracle when requested).
      for (Split split : {Split::IID, Split::OOD}) {
        std::vector<const CaseScores*> split_cases;
        for (const auto& cs : ev.cases)
          if (cs.role == Role::TEST && cs.split == split && cs.has_risk)
            split_cases.push_back(&cs);
        if (split_cases.empty()) continue;
        for (const auto& [m, type] : sem.mapping) {
          for (std::size_t a = 0; a < grid.aggregations.size(); ++a) {
            std::vector<double> conf, risks;
            for (const CaseScores* cs : split_cases) {
              risks.push_back(cs->risk);
              conf.push_back(opts.fd_oracle_confidence
                                 ? -cs->risk
                                 : -cs->agg_scores.at(m)[a]);
            }
            ReportRow row =
                base_row(scenario_label, "fd_aurc", family, seed);
            row.measure = to_string(m);
            row.claimed_type = to_string(type);
            row.aggregation = agg_name(grid.aggregations[a]);
            row.split = to_string(split);
            row.value = aurc(conf, risks);
            rep.rows.push_back(row);
            row.task = "fd_e_aurc";
            row.value = e_aurc(conf, risks);
            rep.rows.push_back(std::move(row));
          }
        }
      }

      // Active learning: query the most uncertain half of the pool and
      // report how much of the induced shift it caught.
      std::vector<const CaseScores*> pool;
      for (const auto& cs : ev.cases)
        if (cs.role == Role::POOL) pool.push_back(&cs);
      if (!pool.empty()) {
        for (const auto& [m, type] : sem.mapping) {
          for (std::size_t a = 0; a < grid.aggregations.size(); ++a) {
            std::vector<std::pair<std::string, double>> scored;
            std::map<std::string, Split> split_of;
            for (const CaseScores* cs : pool) {
              scored.emplace_back(cs->id, cs->agg_scores.at(m)[a]);
              split_of[cs->id] = cs->split;
            }
            const std::vector<std::string> picked = al_query_selection(scored);
            std::int64_t ood = 0;
            for (const auto& id : picked) ood += split_of[id] == Split::OOD;
            ReportRow row =
                base_row(scenario_label, "al_query_quality", family, seed);
            row.measure = to_string(m);
            row.claimed_type = to_string(type);
            row.aggregation = agg_name(grid.aggregations[a]);
            row.value =
                static_cast<double>(ood) / static_cast<double>(picked.size());
            rep.rows.push_back(std::move(row));
          }
        }
      }
      auto al_it = opts.al_dice.find(std::string(to_string(family)));
      if (al_it != opts.al_dice.end()) {
        const auto& d = al_it->second;
        ReportRow row = base_row(scenario_label, "al_improvement", family, seed);
        row.value = al_improvement(d[0], d[1], d[2], d[3]);
        rep.rows.push_back(std::move(row));
      }

      // Calibration: Platt scaling fitted on validation pixels, average
      // calibration error measured on i.i.d. test pixels.
      for (const auto& [m, type] : sem.mapping) {
        auto val_it = ev.calib_val.find(m);
        auto test_it = ev.calib_test.find(m);
        if (val_it == ev.calib_val.end() || test_it == ev.calib_test.end())
          continue;
        const CalibPool& val = val_it->second;
        const CalibPool& test = test_it->second;
        if (val.score.empty() || test.score.empty()) continue;
        PlattFit fit;
        try {
          fit = platt_scale(val.score, val.correct);
        } catch (const Error& e) {
          if (e.code() == Err::SINGLE_CLASS) continue;  // nothing to calibrate
          throw;
        }
        std::vector<double> conf(test.score.size());
        for (std::size_t i = 0; i < test.score.size(); ++i)
          conf[i] = platt_apply(fit, test.score[i]);
        ReportRow row = base_row(scenario_label, "calib_ace", family, seed);
        row.measure = to_string(m);
        row.claimed_type = to_string(type);
        row.split = "iid";
        row.value = ace(conf, test.correct, opts.ace_bins);
        if (fit.capped) row.note = "platt_capped";
        rep.rows.push_back(std::move(row));
      }

      // Ambiguity modeling: map-level NCC per measure plus the sample-vs-
      // rater generalized energy distance (one value per family).
      emit_ncc_rows(rep, ev, scenario_label, "am_ncc", family, seed);
      {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const auto& cs : ev.cases)
          if (cs.has_ged) {
            sum += cs.ged_value;
            ++n;
          }
        if (n > 0) {
          ReportRow row = base_row(scenario_label, "am_ged", family, seed);
          row.split = "iid";
          row.value = sum / static_cast<double>(n);
          rep.rows.push_back(std::move(row));
        }
      }
    }
  }
  sort_report(rep);
  return rep;
}

std::vector<std::string> al_query_selection(
    const std::vector<std::pair<std::string, double>>& pool_scores) {
  if (pool_scores.empty())
    throw Error(Err::EMPTY_POOL, "query selection on an empty pool");
  std::vector<std::pair<std::string, double>> sorted = pool_scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  const std::size_t k = (sorted.size() + 1) / 2;
  std::vector<std::string> picked;
  picked.reserve(k);
  for (std::size_t i = 0; i < k; ++i) picked.push_back(sorted[i].first);
  return picked;
}

std::string_view to_string(Component c) {
  switch (c) {
    case Component::FAMILY: return "family";
    case Component::MEASURE_TYPE: return "measure_type";
    case Component::AGGREGATION: return "aggregation";
  }
  return "?";
}

Component component_from_string(std::string_view s) {
  if (s == "family") return Component::FAMILY;
  if (s == "measure_type") return Component::MEASURE_TYPE;
  if (s == "aggregation") return Component::AGGREGATION;
  throw Error(Err::CONFIG_INVALID, "unknown component: " + std::string(s));
}

bool lower_is_better(const std::string& task) {
  return task == "fd_aurc" || task == "fd_e_aurc" || task == "calib_ace" ||
         task == "am_ged";
}

std::vector<ComponentImprovement> component_improvement_aggregate(
    const StudyReport& report, Component component, const std::string& task) {
  // Claimed types the task cannot rank meaningfully (the AU measures carry
  // no shift signal, so they are dropped from OoD detection and querying).
  auto excluded = [&](const std::string& claimed) {
    return claimed == "au" &&
           (task == "ood_d_auroc" || task == "al_query_quality");
  };

  std::vector<const ReportRow*> rows;
  for (const auto& r : report.rows)
    if (r.task == task && !excluded(r.claimed_type)) rows.push_back(&r);
  if (rows.empty())
    throw Error(Err::INCOMPLETE_GRID, "no rows for task: " + task);

  // Every grid cell must cover the same seed set, otherwise a missing cell
  // would silently bias the flattened means.
  std::set<std::uint64_t> all_seeds;
  for (const ReportRow* r : rows) all_seeds.insert(r->seed);
  std::map<std::string, std::set<std::uint64_t>> cell_seeds;
  for (const ReportRow* r : rows)
    cell_seeds[r->scenario + "|" + r->family + "|" + r->measure + "|" +
               r->aggregation + "|" + r->split]
        .insert(r->seed);
  for (const auto& [cell, seeds] : cell_seeds)
    if (seeds != all_seeds)
      throw Error(Err::INCOMPLETE_GRID, "grid cell missing seeds: " + cell);

  const double sign = lower_is_better(task) ? -1.0 : 1.0;
  double grand_sum = 0.0;
  std::map<std::string, std::vector<double>> groups;
  for (const ReportRow* r : rows) {
    const double v = sign * r->value;
    grand_sum += v;
    std::string key;
    switch (component) {
      case Component::FAMILY: key = r->family; break;
      case Component::MEASURE_TYPE: key = r->claimed_type; break;
      case Component::AGGREGATION: key = r->aggregation; break;
    }
    groups[key].push_back(v);
  }
  const double grand_mean = grand_sum / static_cast<double>(rows.size());

  std::vector<ComponentImprovement> out;
  for (const auto& [key, values] : groups) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    out.push_back({key, mean - grand_mean, std::sqrt(var / n),
                   static_cast<std::int64_t>(values.size())});
  }
  return out;  // std::map iteration is already sorted by key
}

std::vector<SummaryRow> summarize_report(const StudyReport& report) {
  struct Acc {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t n = 0;
  };
  std::map<std::array<std::string, 7>, Acc> acc;
  for (const auto& r : report.rows) {
    Acc& a = acc[{r.scenario, r.task, r.family, r.measure, r.claimed_type,
                  r.aggregation, r.split}];
    a.sum += r.value;
    a.sumsq += r.value * r.value;
    ++a.n;
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, a] : acc) {
    SummaryRow s;
    s.scenario = key[0];
    s.task = key[1];
    s.family = key[2];
    s.measure = key[3];
    s.claimed_type = key[4];
    s.aggregation = key[5];
    s.split = key[6];
    s.n = a.n;
    s.mean = a.sum / static_cast<double>(a.n);
    const double var = a.sumsq / static_cast<double>(a.n) - s.mean * s.mean;
    s.sd = std::sqrt(std::max(0.0, var));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace uqseg
