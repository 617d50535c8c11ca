#pragma once

#include <filesystem>
#include <optional>

#include "uqseg/study.hpp"
#include "uqseg/types.hpp"

namespace uqseg {

// Dense array as stored on disk: float64 or uint8, C-order, little-endian.
struct NpyArray {
  std::vector<std::int64_t> shape;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;
  bool is_u8 = false;

  std::int64_t size() const { return numel(shape); }
};

NpyArray read_array(const std::filesystem::path& path);
void write_array(const std::filesystem::path& path,
                 const std::vector<std::int64_t>& shape,
                 const std::vector<double>& data);
void write_array(const std::filesystem::path& path,
                 const std::vector<std::int64_t>& shape,
                 const std::vector<std::uint8_t>& data);

struct ManifestCase {
  std::string case_id;
  Split split = Split::IID;
  Role role = Role::TEST;
  std::string image;   // paths relative to the manifest file; "" = absent
  std::string raters;
  std::string stack;
  std::vector<std::string> scenario_tags;
};

struct Manifest {
  std::string dataset;
  std::int64_t format_version = 1;
  std::vector<ManifestCase> cases;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

// Reads the arrays a manifest entry points to. `base` is the manifest's
// directory. Missing stack/raters stay empty optionals.
CaseRecord load_case(const ManifestCase& mc, const std::filesystem::path& base);

std::string report_to_csv(const StudyReport& report);
StudyReport report_from_csv(const std::string& text);
std::string report_to_json(const StudyReport& report);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);
std::string improvements_to_csv(const std::vector<ComponentImprovement>& rows,
                                Component component, const std::string& task);

// Writes <base>.npy (map rescaled into [0,1] against the family's display
// bound) and <base>.json (the bound plus identifying metadata). Sampling
// families display against 0.7, the deterministic model against 0.5.
double heatmap_bound(ModelFamily family);
void export_heatmap(const UncertaintyMap& map, ModelFamily family,
                    const std::string& case_id,
                    const std::filesystem::path& base_path);

// Everything a study run needs, loadable from one JSON file.
struct RunConfig {
  std::string scenario = "s3b";                       // downstream target
  std::vector<std::string> separation_scenarios = {"s1", "s2", "s3a", "s3b"};
  std::uint64_t master_seed = 7;
  std::int64_t volume_edge = 48;
  std::int64_t n_val = 10;
  std::int64_t n_pool = 20;
  StudyGrid grid;
  DownstreamOptions downstream;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& cfg);
RunConfig run_config_from_json_text(const std::string& text);

// Next unused serially numbered run directory (run-0001, run-0002, ...)
// under `root`; created on allocation so reruns never touch old outputs.
std::filesystem::path allocate_run_dir(const std::filesystem::path& root);

}  // namespace uqseg
