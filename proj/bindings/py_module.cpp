#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "uqseg/aggregation.hpp"
#include "uqseg/core.hpp"
#include "uqseg/error.hpp"
#include "uqseg/measures.hpp"
#include "uqseg/metrics.hpp"
#include "uqseg/simulate.hpp"
#include "uqseg/toygen.hpp"
#include "uqseg/types.hpp"

namespace py = pybind11;
using namespace uqseg;

namespace {

using ArrayF = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ArrayU = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<std::int64_t> shape_of(const py::array& a) {
  std::vector<std::int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = a.shape(i);
  return shape;
}

ProbabilityStack to_stack(const ArrayF& a) {
  if (a.ndim() < 3)
    throw Error(Err::SHAPE_MISMATCH,
                "stack needs sample, class and spatial axes");
  ProbabilityStack st;
  st.samples = a.shape(0);
  st.classes = a.shape(1);
  for (py::ssize_t i = 2; i < a.ndim(); ++i) st.spatial.push_back(a.shape(i));
  st.data.assign(a.data(), a.data() + a.size());
  return st;
}

UncertaintyMap to_map(const ArrayF& a) {
  UncertaintyMap u;
  u.spatial = shape_of(a);
  u.data.assign(a.data(), a.data() + a.size());
  return u;
}

LabelField to_mask(const ArrayU& a) {
  LabelField f;
  f.spatial = shape_of(a);
  f.data.assign(a.data(), a.data() + a.size());
  return f;
}

RaterSet to_raters(const ArrayU& a) {
  if (a.ndim() < 2)
    throw Error(Err::SHAPE_MISMATCH, "rater array needs a leading rater axis");
  RaterSet r;
  r.raters = a.shape(0);
  for (py::ssize_t i = 1; i < a.ndim(); ++i) r.spatial.push_back(a.shape(i));
  r.masks.assign(a.data(), a.data() + a.size());
  return r;
}

py::array_t<double> from_f64(const std::vector<double>& data,
                             const std::vector<std::int64_t>& shape) {
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(double));
  return out;
}

py::array_t<std::uint8_t> from_u8(const std::vector<std::uint8_t>& data,
                                  const std::vector<std::int64_t>& shape) {
  py::array_t<std::uint8_t> out(shape);
  std::memcpy(out.mutable_data(), data.data(), data.size());
  return out;
}

std::vector<std::int64_t> with_lead(std::int64_t lead,
                                    const std::vector<std::int64_t>& rest) {
  std::vector<std::int64_t> shape{lead};
  shape.insert(shape.end(), rest.begin(), rest.end());
  return shape;
}

SimulatorConfig make_config(const std::string& family, std::int64_t n_samples,
                            double fidelity, double spread,
                            double ood_multiplier, double softness,
                            std::uint64_t seed) {
  SimulatorConfig cfg;
  cfg.family = family_from_string(family);
  cfg.n_samples = cfg.family == ModelFamily::DETERMINISTIC ? 1 : n_samples;
  cfg.fidelity = fidelity;
  cfg.sample_spread = spread;
  cfg.ood_spread_multiplier = ood_multiplier;
  cfg.border_softness = softness;
  cfg.seed = seed;
  validate_config(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_uqseg, m) {
  m.doc() =
      "Uncertainty evaluation for semantic segmentation: pixel measures, "
      "image aggregation, downstream metrics, toy data and a prediction "
      "simulator.";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg =
          std::string(err_name(e.code())) + ": " + e.what();
      if (is_io_error(e.code()))
        PyErr_SetString(PyExc_OSError, msg.c_str());
      else
        PyErr_SetString(PyExc_ValueError, msg.c_str());
    }
  });

  m.def(
      "validate_stack",
      [](const ArrayF& a) {
        const ValidationResult r = validate_stack(to_stack(a));
        py::dict d;
        d["ok"] = r.ok;
        d["code"] = r.ok ? "" : std::string(err_name(r.code));
        d["message"] = r.message;
        d["flat_index"] = r.flat_index;
        return d;
      },
      py::arg("stack"),
      "Check a [samples, classes, ...spatial] probability stack.");

  m.def(
      "mean_prediction",
      [](const ArrayF& a) {
        const ProbabilityStack st = to_stack(a);
        MeanPrediction mp = mean_prediction(st);
        return py::make_tuple(
            from_f64(mp.mean, with_lead(mp.classes, mp.spatial)),
            from_u8(mp.argmax, mp.spatial));
      },
      py::arg("stack"), "Sample-mean probabilities and their argmax labels.");

  m.def(
      "shannon_entropy",
      [](const std::vector<double>& p) { return shannon_entropy(p); },
      py::arg("p"), "Entropy in nats with 0*ln(0) := 0.");

  m.def(
      "compute_measure",
      [](const ArrayF& a, const std::string& measure,
         const std::string& family) {
        const UncertaintyMap u = compute_measure(
            to_stack(a), measure_from_string(measure),
            family_from_string(family));
        return py::make_tuple(from_f64(u.data, u.spatial),
                              std::string(to_string(u.claimed_type)));
      },
      py::arg("stack"), py::arg("measure"), py::arg("family"),
      "Pixel uncertainty map plus the type the family claims for it.");

  m.def(
      "semantics",
      [](const std::string& family) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [mm, tt] : semantics_for(family_from_string(family)).mapping)
          out.emplace_back(std::string(to_string(mm)),
                           std::string(to_string(tt)));
        return out;
      },
      py::arg("family"), "(measure, claimed_type) pairs for a model family.");

  m.def(
      "image_sum", [](const ArrayF& a) { return aggregate_image_sum(to_map(a)); },
      py::arg("map"));
  m.def(
      "patch_max",
      [](const ArrayF& a, std::int64_t window_edge) {
        return aggregate_patch_max(to_map(a), window_edge);
      },
      py::arg("map"), py::arg("window_edge") = 10);
  m.def(
      "threshold_mean",
      [](const ArrayF& a, double lam) {
        return aggregate_threshold_mean(to_map(a), lam);
      },
      py::arg("map"), py::arg("lam"));
  m.def(
      "compute_threshold",
      [](const std::vector<ArrayF>& maps, const std::vector<ArrayU>& masks) {
        std::vector<UncertaintyMap> ms;
        std::vector<LabelField> fs;
        for (const auto& a : maps) ms.push_back(to_map(a));
        for (const auto& a : masks) fs.push_back(to_mask(a));
        return compute_threshold(ms, fs);
      },
      py::arg("val_maps"), py::arg("val_pred_masks"),
      "Foreground-ratio quantile threshold from validation data.");

  m.def(
      "dice",
      [](const ArrayU& a, const ArrayU& b, std::int64_t positive_class) {
        return dice(to_mask(a), to_mask(b), positive_class);
      },
      py::arg("pred"), py::arg("ref"), py::arg("positive_class") = 1);
  m.def("auroc", &auroc, py::arg("scores"), py::arg("labels"));
  m.def("aurc", &aurc, py::arg("confidences"), py::arg("risks"));
  m.def("e_aurc", &e_aurc, py::arg("confidences"), py::arg("risks"));
  m.def(
      "risk_coverage_curve",
      [](const std::vector<double>& conf, const std::vector<double>& risks) {
        std::vector<std::pair<double, double>> out;
        for (const RiskCoveragePoint& p : risk_coverage_curve(conf, risks))
          out.emplace_back(p.coverage, p.selective_risk);
        return out;
      },
      py::arg("confidences"), py::arg("risks"),
      "(coverage, selective_risk) points, descending coverage.");
  m.def(
      "platt_scale",
      [](const std::vector<double>& scores, const std::vector<int>& correct) {
        const PlattFit f = platt_scale(scores, correct);
        return py::make_tuple(f.a, f.b, f.capped);
      },
      py::arg("scores"), py::arg("correct"));
  m.def("ace", &ace, py::arg("confidences"), py::arg("correct"),
        py::arg("n_bins") = 10);
  m.def(
      "ncc",
      [](const ArrayF& a, const ArrayF& b) {
        const NccResult r = ncc(to_map(a), to_map(b));
        return py::make_tuple(r.value, r.zero_variance);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "rater_variance",
      [](const ArrayU& raters, std::int64_t positive_class) {
        const UncertaintyMap u = rater_variance_map(to_raters(raters), positive_class);
        return from_f64(u.data, u.spatial);
      },
      py::arg("raters"), py::arg("positive_class") = 1);
  m.def(
      "ged",
      [](const std::vector<ArrayU>& preds, const std::vector<ArrayU>& raters,
         std::int64_t positive_class, std::uint64_t seed) {
        std::vector<LabelField> ps, rs;
        for (const auto& a : preds) ps.push_back(to_mask(a));
        for (const auto& a : raters) rs.push_back(to_mask(a));
        return ged(ps, rs, positive_class, seed);
      },
      py::arg("pred_masks"), py::arg("rater_masks"),
      py::arg("positive_class") = 1, py::arg("seed") = 0);
  m.def("al_improvement", &al_improvement, py::arg("dice_t1_method"),
        py::arg("dice_t2_method"), py::arg("dice_t1_random"),
        py::arg("dice_t2_random"));

  m.def(
      "toy_case",
      [](double radius, const std::array<double, 3>& center, double intensity,
         double blur_sigma, std::int64_t volume_edge, std::uint64_t seed,
         bool ood) {
        ToyCaseSpec spec;
        spec.radius = radius;
        spec.center = center;
        spec.intensity = intensity;
        spec.blur_sigma = blur_sigma;
        spec.ood = ood;
        const ToyCase tc = generate_toy_case(spec, volume_edge, seed);
        return py::make_tuple(
            from_f64(tc.image, tc.spatial),
            from_u8(tc.raters.masks,
                    with_lead(tc.raters.raters, tc.raters.spatial)));
      },
      py::arg("radius") = 9.0,
      py::arg("center") = std::array<double, 3>{24.0, 24.0, 24.0},
      py::arg("intensity") = 0.9, py::arg("blur_sigma") = 2.0,
      py::arg("volume_edge") = 48, py::arg("seed") = 0, py::arg("ood") = false,
      "One synthetic case: image plus nested rater masks.");

  m.def(
      "scenario_counts",
      [](const std::string& name) {
        const ToyScenario t = scenario_table(scenario_from_string(name));
        py::dict d;
        d["n_train"] = t.n_train;
        d["n_train_blur"] = t.n_train_blur;
        d["n_test_iid"] = t.n_test_iid;
        d["n_test_iid_blur"] = t.n_test_iid_blur;
        d["n_test_ood"] = t.n_test_ood;
        return d;
      },
      py::arg("scenario"));

  m.def(
      "plan_scenario",
      [](const std::string& name, std::uint64_t master_seed,
         std::int64_t volume_edge, std::int64_t n_val, std::int64_t n_pool) {
        const ScenarioPlan plan =
            plan_scenario(scenario_from_string(name), master_seed, volume_edge,
                          n_val, n_pool);
        py::list out;
        for (const PlannedToyCase& pc : plan.cases) {
          py::dict d;
          d["case_id"] = pc.case_id;
          d["split"] = std::string(to_string(pc.split));
          d["role"] = std::string(to_string(pc.role));
          d["seed"] = pc.seed;
          d["tags"] = pc.tags;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("scenario"), py::arg("master_seed"), py::arg("volume_edge") = 48,
      py::arg("n_val") = 0, py::arg("n_pool") = 0,
      "Deterministic case listing without materializing any volume.");

  m.def(
      "simulate",
      [](const ArrayU& raters, const std::string& family, std::uint64_t seed,
         std::int64_t n_samples, double fidelity, double spread, bool ood,
         double ood_multiplier, double softness) {
        CaseRecord rec;
        rec.case_id = "py";
        rec.split = ood ? Split::OOD : Split::IID;
        rec.raters = to_raters(raters);
        rec.spatial = rec.raters->spatial;
        const SimulatorConfig cfg =
            make_config(family, n_samples, fidelity, spread, ood_multiplier,
                        softness, seed);
        const ProbabilityStack st = simulate_for_family(rec, cfg);
        return from_f64(st.data,
                        with_lead(st.samples, with_lead(st.classes, st.spatial)));
      },
      py::arg("raters"), py::arg("family") = "ttd", py::arg("seed") = 0,
      py::arg("n_samples") = 8, py::arg("fidelity") = 1.0,
      py::arg("spread") = 0.4, py::arg("ood") = false,
      py::arg("ood_multiplier") = 4.0, py::arg("softness") = 1.5,
      "Simulated prediction stack for rater masks (no training involved).");
}
