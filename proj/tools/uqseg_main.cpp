#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uqseg/aggregation.hpp"
#include "uqseg/core.hpp"
#include "uqseg/error.hpp"
#include "uqseg/io.hpp"
#include "uqseg/measures.hpp"
#include "uqseg/metrics.hpp"
#include "uqseg/simulate.hpp"
#include "uqseg/study.hpp"
#include "uqseg/toygen.hpp"
#include "uqseg/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uqseg;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(lower(item));
  return out;
}

std::string sanitize_label(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = '_';
  return s.empty() ? "-" : s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Err::IO_FAILURE, "cannot open: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Err::IO_FAILURE, "cannot write: " + p.string());
  out << text;
  if (!out) throw Error(Err::IO_FAILURE, "write failed: " + p.string());
}

void emit(const json& summary) { std::cout << summary.dump() << "\n"; }

template <typename F>
int guarded(F&& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(err_name(e.code()))},
                      {"detail", e.what()}}
                     .dump()
              << "\n";
    return is_io_error(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "INTERNAL"}, {"detail", e.what()}}.dump()
              << "\n";
    return 3;
  }
}

ProbabilityStack stack_from_array(NpyArray&& a, const std::string& origin) {
  if (a.is_u8)
    throw Error(Err::DTYPE_UNSUPPORTED, "stack must be float64: " + origin);
  if (a.shape.size() < 3)
    throw Error(Err::SHAPE_MISMATCH,
                "stack needs sample, class and spatial axes: " + origin);
  ProbabilityStack st;
  st.samples = a.shape[0];
  st.classes = a.shape[1];
  st.spatial.assign(a.shape.begin() + 2, a.shape.end());
  st.data = std::move(a.f64);
  return st;
}

std::vector<std::int64_t> stack_shape(const ProbabilityStack& st) {
  std::vector<std::int64_t> shape{st.samples, st.classes};
  shape.insert(shape.end(), st.spatial.begin(), st.spatial.end());
  return shape;
}

std::vector<std::int64_t> rater_shape(const RaterSet& r) {
  std::vector<std::int64_t> shape{r.raters};
  shape.insert(shape.end(), r.spatial.begin(), r.spatial.end());
  return shape;
}

std::string joined_tags(const std::vector<std::string>& tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out += ";";
    out += tags[i];
  }
  return out;
}

// --------------------------------------------------------------- toygen ---

struct ToygenArgs {
  std::string scenario = "s1";
  std::uint64_t seed = 7;
  std::string out;
  std::int64_t volume_edge = 48;
  std::int64_t n_val = 0;
  std::int64_t n_pool = 0;
};

void cmd_toygen(const ToygenArgs& a) {
  const ScenarioId id = scenario_from_string(lower(a.scenario));
  const fs::path outdir = a.out;
  const fs::path manifest_path = outdir / "manifest.json";
  if (fs::exists(manifest_path))
    throw Error(Err::CONFIG_INVALID,
                "refusing to overwrite existing dataset: " +
                    manifest_path.string());
  std::error_code ec;
  fs::create_directories(outdir / "cases", ec);
  if (ec) throw Error(Err::IO_FAILURE, "cannot create: " + outdir.string());

  const ScenarioPlan plan =
      plan_scenario(id, a.seed, a.volume_edge, a.n_val, a.n_pool);
  Manifest m;
  m.dataset = "toy-" + std::string(to_string(id));
  std::string table = "case_id,split,role,tags\n";
  for (const PlannedToyCase& pc : plan.cases) {
    const ToyCase tc = materialize(pc, a.volume_edge);
    ManifestCase mc;
    mc.case_id = pc.case_id;
    mc.split = pc.split;
    mc.role = pc.role;
    mc.scenario_tags = pc.tags;
    mc.image = "cases/" + pc.case_id + ".image.npy";
    mc.raters = "cases/" + pc.case_id + ".raters.npy";
    write_array(outdir / mc.image, tc.spatial, tc.image);
    write_array(outdir / mc.raters, rater_shape(tc.raters), tc.raters.masks);
    table += pc.case_id + "," + std::string(to_string(pc.split)) + "," +
             std::string(to_string(pc.role)) + "," + joined_tags(pc.tags) +
             "\n";
    m.cases.push_back(std::move(mc));
  }
  save_manifest(m, manifest_path);
  spit(outdir / "cases.csv", table);
  emit(json{{"command", "toygen"},
            {"scenario", std::string(to_string(id))},
            {"seed", a.seed},
            {"cases", m.cases.size()},
            {"manifest", manifest_path.string()}});
}

// ------------------------------------------------------------- simulate ---

struct SimulateArgs {
  std::string manifest;
  std::string family = "ttd";
  SimulatorConfig cfg;
  std::string out_manifest;  // default: next to the input manifest
};

void cmd_simulate(const SimulateArgs& a) {
  SimulatorConfig cfg = a.cfg;
  cfg.family = family_from_string(lower(a.family));
  if (cfg.family == ModelFamily::DETERMINISTIC) cfg.n_samples = 1;
  validate_config(cfg);

  const fs::path in_path = a.manifest;
  Manifest m = load_manifest(in_path);
  const fs::path base = in_path.parent_path();
  const std::string suffix = std::string(to_string(cfg.family)) + ".s" +
                             std::to_string(cfg.seed);

  std::string table = "case_id,split,role,samples,stack\n";
  std::int64_t simulated = 0, skipped = 0;
  for (ManifestCase& mc : m.cases) {
    if (mc.raters.empty()) {
      ++skipped;
      continue;
    }
    const CaseRecord rec = load_case(mc, base);
    const ProbabilityStack st = simulate_for_family(rec, cfg);
    mc.stack = "cases/" + mc.case_id + ".stack." + suffix + ".npy";
    write_array(base / mc.stack, stack_shape(st), st.data);
    table += mc.case_id + "," + std::string(to_string(mc.split)) + "," +
             std::string(to_string(mc.role)) + "," +
             std::to_string(st.samples) + "," + mc.stack + "\n";
    ++simulated;
  }
  const fs::path out_path = a.out_manifest.empty()
                                ? base / ("manifest." + suffix + ".json")
                                : fs::path(a.out_manifest);
  save_manifest(m, out_path);
  fs::path csv = out_path;
  csv.replace_extension(".csv");
  spit(csv, table);
  emit(json{{"command", "simulate"},
            {"family", std::string(to_string(cfg.family))},
            {"seed", cfg.seed},
            {"simulated", simulated},
            {"skipped_no_raters", skipped},
            {"manifest", out_path.string()}});
}

// ---------------------------------------------------------- uncertainty ---

struct UncertaintyArgs {
  std::string stack;     // single-stack mode
  std::string manifest;  // batch mode
  std::string family = "ttd";
  std::string measures;  // comma list; empty = all for the family
  std::string out;
  bool heatmaps = false;
};

void cmd_uncertainty(const UncertaintyArgs& a) {
  if (a.stack.empty() == a.manifest.empty())
    throw Error(Err::CONFIG_INVALID,
                "pass exactly one of --stack and --manifest");
  const ModelFamily family = family_from_string(lower(a.family));

  std::vector<Measure> measures;
  if (a.measures.empty()) {
    for (const auto& [m, t] : semantics_for(family).mapping) measures.push_back(m);
  } else {
    for (const std::string& name : split_list(a.measures))
      measures.push_back(measure_from_string(name));
  }

  const fs::path outdir = a.out;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw Error(Err::IO_FAILURE, "cannot create: " + outdir.string());

  std::vector<std::pair<std::string, ProbabilityStack>> stacks;
  if (!a.stack.empty()) {
    const fs::path p = a.stack;
    stacks.emplace_back(p.stem().string(), stack_from_array(read_array(p), p.string()));
  } else {
    const fs::path mp = a.manifest;
    const Manifest m = load_manifest(mp);
    for (const ManifestCase& mc : m.cases) {
      if (mc.stack.empty()) continue;
      NpyArray arr = read_array(mp.parent_path() / mc.stack);
      stacks.emplace_back(mc.case_id, stack_from_array(std::move(arr), mc.stack));
    }
    if (stacks.empty())
      throw Error(Err::CONFIG_INVALID, "manifest holds no prediction stacks");
  }

  std::string table = "case_id,measure,claimed_type,file\n";
  std::int64_t written = 0;
  for (const auto& [case_id, st] : stacks) {
    for (const Measure m : measures) {
      const UncertaintyMap u = compute_measure(st, m, family);
      const std::string stem = case_id + "." + std::string(to_string(m));
      write_array(outdir / (stem + ".npy"), u.spatial, u.data);
      if (a.heatmaps)
        export_heatmap(u, family, case_id, outdir / (stem + ".heatmap"));
      table += case_id + "," + std::string(to_string(m)) + "," +
               std::string(to_string(u.claimed_type)) + "," + stem + ".npy\n";
      ++written;
    }
  }
  spit(outdir / "maps.csv", table);
  emit(json{{"command", "uncertainty"},
            {"family", std::string(to_string(family))},
            {"maps", written},
            {"heatmaps", a.heatmaps},
            {"out", outdir.string()}});
}

// ------------------------------------------------------------ aggregate ---

struct AggregateArgs {
  std::string map;
  std::string strategy = "image_sum";
  std::int64_t window_edge = 10;
  double threshold = -1.0;
  bool has_threshold = false;
  std::string out;  // optional CSV
};

void cmd_aggregate(const AggregateArgs& a) {
  NpyArray arr = read_array(a.map);
  if (arr.is_u8)
    throw Error(Err::DTYPE_UNSUPPORTED, "uncertainty maps must be float64");
  UncertaintyMap u;
  u.spatial = arr.shape;
  u.data = std::move(arr.f64);

  AggregationSpec spec;
  spec.strategy = aggregation_from_string(lower(a.strategy));
  spec.window_edge = a.window_edge;
  if (a.has_threshold) spec.threshold = a.threshold;
  const double value = aggregate(u, spec);

  if (!a.out.empty()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    spit(a.out, "file,strategy,window_edge,value\n" + a.map + "," +
                    std::string(to_string(spec.strategy)) + "," +
                    std::to_string(spec.window_edge) + "," + buf + "\n");
  }
  emit(json{{"command", "aggregate"},
            {"strategy", std::string(to_string(spec.strategy))},
            {"value", value}});
}

// ----------------------------------------------------- report rendering ---

void write_report_files(const fs::path& dir, const StudyReport& report) {
  spit(dir / "report.csv", report_to_csv(report));
  spit(dir / "report.json", report_to_json(report));
  spit(dir / "summary.csv", summary_to_csv(summarize_report(report)));
}

// ------------------------------------------------------------- evaluate ---

struct EvaluateArgs {
  std::string manifest;
  std::string family = "ttd";
  std::uint64_t seed = 0;
  std::string out = "runs";
  std::string aggregations = "image_sum,patch_max,threshold_mean";
  std::int64_t window_edge = 10;
  std::int64_t ace_bins = 10;
  bool oracle_confidence = false;
};

void cmd_evaluate(const EvaluateArgs& a) {
  const fs::path mp = a.manifest;
  const Manifest m = load_manifest(mp);
  std::vector<CaseRecord> cases;
  for (const ManifestCase& mc : m.cases)
    cases.push_back(load_case(mc, mp.parent_path()));

  StudyGrid grid;
  grid.families = {family_from_string(lower(a.family))};
  for (const std::string& name : split_list(a.aggregations))
    grid.aggregations.push_back(
        {aggregation_from_string(name), a.window_edge, std::nullopt});
  grid.seeds = {a.seed};
  grid.base_sim.family = grid.families[0];
  if (grid.families[0] == ModelFamily::DETERMINISTIC)
    grid.base_sim.n_samples = 1;
  validate_grid(grid);

  DownstreamOptions opts;
  opts.ace_bins = a.ace_bins;
  opts.fd_oracle_confidence = a.oracle_confidence;

  const StudyReport report =
      run_downstream_eval(cases, grid, opts, sanitize_label(m.dataset));
  const fs::path dir = allocate_run_dir(a.out);
  write_report_files(dir, report);
  emit(json{{"command", "evaluate"},
            {"run_dir", dir.string()},
            {"rows", report.rows.size()}});
}

// ---------------------------------------------------------------- study ---

struct StudyArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "runs";
};

RunConfig study_config(const StudyArgs& a) {
  RunConfig cfg =
      a.config.empty() ? default_run_config() : load_run_config(a.config);
  if (a.seed_set) cfg.master_seed = a.seed;
  validate_grid(cfg.grid);
  return cfg;
}

std::vector<CaseRecord> build_eval_cases(ScenarioId id, const RunConfig& cfg,
                                         std::int64_t n_pool) {
  // Training images are never consumed by the evaluation passes (the
  // simulator stands in for the trained model), so only the held-out roles
  // are rendered. The plan still covers every case, keeping per-case seeds
  // identical to a full materialization.
  const ScenarioPlan plan = plan_scenario(id, cfg.master_seed, cfg.volume_edge,
                                          cfg.n_val, n_pool);
  std::vector<CaseRecord> cases;
  for (const PlannedToyCase& pc : plan.cases) {
    if (pc.role == Role::TRAIN) continue;
    ToyCase tc = materialize(pc, cfg.volume_edge);
    CaseRecord rec;
    rec.case_id = pc.case_id;
    rec.split = pc.split;
    rec.role = pc.role;
    rec.scenario_tags = pc.tags;
    rec.spatial = tc.spatial;
    rec.image = std::move(tc.image);
    rec.raters = std::move(tc.raters);
    cases.push_back(std::move(rec));
  }
  return cases;
}

void cmd_study_separation(const StudyArgs& a) {
  const RunConfig cfg = study_config(a);
  std::map<ScenarioId, std::vector<CaseRecord>> scenarios;
  for (const std::string& name : cfg.separation_scenarios) {
    const ScenarioId id = scenario_from_string(lower(name));
    scenarios[id] = build_eval_cases(id, cfg, 0);
  }
  const StudyReport report = run_separation_study(scenarios, cfg.grid);
  const fs::path dir = allocate_run_dir(a.out);
  save_run_config(cfg, dir / "config.json");
  write_report_files(dir, report);
  emit(json{{"command", "study-separation"},
            {"run_dir", dir.string()},
            {"rows", report.rows.size()}});
}

void cmd_study_downstream(const StudyArgs& a) {
  const RunConfig cfg = study_config(a);
  const ScenarioId id = scenario_from_string(lower(cfg.scenario));
  const std::vector<CaseRecord> cases = build_eval_cases(id, cfg, cfg.n_pool);
  const StudyReport report = run_downstream_eval(
      cases, cfg.grid, cfg.downstream, std::string(to_string(id)));
  const fs::path dir = allocate_run_dir(a.out);
  save_run_config(cfg, dir / "config.json");
  write_report_files(dir, report);
  emit(json{{"command", "study-downstream"},
            {"run_dir", dir.string()},
            {"rows", report.rows.size()}});
}

// --------------------------------------------------------------- report ---

struct ReportArgs {
  std::string report;
  std::string out;
  std::string component;
  std::string task;
};

void cmd_report(const ReportArgs& a) {
  const StudyReport report = report_from_csv(slurp(a.report));
  const fs::path outdir = a.out;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw Error(Err::IO_FAILURE, "cannot create: " + outdir.string());
  write_report_files(outdir, report);

  if (a.component.empty() != a.task.empty())
    throw Error(Err::CONFIG_INVALID,
                "--component and --task must be passed together");
  if (!a.component.empty()) {
    const Component comp = component_from_string(lower(a.component));
    const auto rows = component_improvement_aggregate(report, comp, a.task);
    spit(outdir / ("improvements." + lower(a.component) + "." + a.task + ".csv"),
         improvements_to_csv(rows, comp, a.task));
  }
  emit(json{{"command", "report"},
            {"rows", report.rows.size()},
            {"out", outdir.string()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Evaluation toolkit for pixel and image level uncertainty in "
      "semantic segmentation"};
  app.require_subcommand(1);
  int rc = 0;

  ToygenArgs tg;
  CLI::App* toygen = app.add_subcommand(
      "toygen", "Generate a synthetic multi-rater 3D dataset");
  toygen->add_option("--scenario", tg.scenario, "s1, s2, s3a or s3b");
  toygen->add_option("--seed", tg.seed, "Master seed");
  toygen->add_option("--out", tg.out, "Dataset directory")->required();
  toygen->add_option("--volume-edge", tg.volume_edge, "Voxels per axis");
  toygen->add_option("--n-val", tg.n_val, "Extra validation cases");
  toygen->add_option("--n-pool", tg.n_pool, "Extra unlabeled pool cases");
  toygen->callback([&] { rc = guarded([&] { cmd_toygen(tg); }); });

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Add simulated prediction stacks to a dataset");
  simulate->add_option("--manifest", sim.manifest, "Input manifest")->required();
  simulate->add_option("--family", sim.family,
                       "deterministic, ttd, ensemble, tta or ssn");
  simulate->add_option("--seed", sim.cfg.seed, "Simulator seed");
  simulate->add_option("--n-samples", sim.cfg.n_samples, "Samples per stack");
  simulate->add_option("--fidelity", sim.cfg.fidelity, "Mean-logit fidelity");
  simulate->add_option("--spread", sim.cfg.sample_spread,
                       "Between-sample logit noise sd");
  simulate->add_option("--ood-multiplier", sim.cfg.ood_spread_multiplier,
                       "Spread multiplier on OoD cases");
  simulate->add_option("--softness", sim.cfg.border_softness,
                       "Border softness (0 = hard)");
  simulate->add_option("--out-manifest", sim.out_manifest,
                       "Output manifest path");
  simulate->callback([&] { rc = guarded([&] { cmd_simulate(sim); }); });

  UncertaintyArgs unc;
  CLI::App* uncertainty = app.add_subcommand(
      "uncertainty", "Pixel uncertainty maps from prediction stacks");
  uncertainty->add_option("--stack", unc.stack, "Single stack (.npy)");
  uncertainty->add_option("--manifest", unc.manifest,
                          "Manifest with stack entries");
  uncertainty->add_option("--family", unc.family, "Model family");
  uncertainty->add_option("--measures", unc.measures,
                          "Comma list (pe,ee,mi,one_minus_msr); default: all "
                          "the family provides");
  uncertainty->add_option("--out", unc.out, "Output directory")->required();
  uncertainty->add_flag("--heatmaps", unc.heatmaps,
                        "Also export fixed-range normalized heatmaps");
  uncertainty->callback([&] { rc = guarded([&] { cmd_uncertainty(unc); }); });

  AggregateArgs agg;
  CLI::App* aggregate = app.add_subcommand(
      "aggregate", "Reduce an uncertainty map to an image score");
  aggregate->add_option("--map", agg.map, "Uncertainty map (.npy)")->required();
  aggregate->add_option("--strategy", agg.strategy,
                        "image_sum, patch_max or threshold_mean");
  aggregate->add_option("--window-edge", agg.window_edge, "Patch edge");
  aggregate->add_option("--threshold", agg.threshold, "Threshold lambda")
      ->each([&](const std::string&) { agg.has_threshold = true; });
  aggregate->add_option("--out", agg.out, "Optional CSV path");
  aggregate->callback([&] { rc = guarded([&] { cmd_aggregate(agg); }); });

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Downstream-task evaluation of a manifest's stacks");
  evaluate->add_option("--manifest", ev.manifest, "Input manifest")->required();
  evaluate->add_option("--family", ev.family, "Model family of the stacks");
  evaluate->add_option("--seed", ev.seed, "Evaluation seed");
  evaluate->add_option("--out", ev.out, "Run-directory root");
  evaluate->add_option("--aggregations", ev.aggregations, "Comma list");
  evaluate->add_option("--window-edge", ev.window_edge, "Patch edge");
  evaluate->add_option("--ace-bins", ev.ace_bins, "Calibration bins");
  evaluate->add_flag("--oracle-confidence", ev.oracle_confidence,
                     "Replace confidences with the failure-detection oracle");
  evaluate->callback([&] { rc = guarded([&] { cmd_evaluate(ev); }); });

  StudyArgs sep, down;
  CLI::App* study = app.add_subcommand("study", "Full study pipelines");
  study->require_subcommand(1);
  CLI::App* separation = study->add_subcommand(
      "separation", "Uncertainty-separation study over the toy scenarios");
  separation->add_option("--config", sep.config, "RunConfig JSON");
  separation->add_option("--seed", sep.seed, "Overrides the config seed")
      ->each([&](const std::string&) { sep.seed_set = true; });
  separation->add_option("--out", sep.out, "Run-directory root");
  separation->callback(
      [&] { rc = guarded([&] { cmd_study_separation(sep); }); });

  CLI::App* downstream = study->add_subcommand(
      "downstream", "Downstream-task study on one toy scenario");
  downstream->add_option("--config", down.config, "RunConfig JSON");
  downstream->add_option("--seed", down.seed, "Overrides the config seed")
      ->each([&](const std::string&) { down.seed_set = true; });
  downstream->add_option("--out", down.out, "Run-directory root");
  downstream->callback(
      [&] { rc = guarded([&] { cmd_study_downstream(down); }); });

  ReportArgs rep;
  CLI::App* report = app.add_subcommand(
      "report", "Re-render a report CSV (canonical CSV/JSON/summary)");
  report->add_option("--report", rep.report, "report.csv path")->required();
  report->add_option("--out", rep.out, "Output directory")->required();
  report->add_option("--component", rep.component,
                     "family, measure_type or aggregation");
  report->add_option("--task", rep.task, "Task to aggregate improvements for");
  report->callback([&] { rc = guarded([&] { cmd_report(rep); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return rc;
}
