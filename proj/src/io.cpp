#include "uqseg/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace uqseg {
namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string shape_tuple(const std::vector<std::int64_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1)
      s += ",";
    else if (i + 1 < shape.size())
      s += ", ";
  }
  return s + ")";
}

void write_npy(const fs::path& path, const std::vector<std::int64_t>& shape,
               const void* data, std::size_t bytes, const char* descr) {
  std::string header = "{'descr': '";
  header += descr;
  header += "', 'fortran_order': False, 'shape': ";
  header += shape_tuple(shape);
  header += ", }";
  // Total preamble (magic + version + length field + header + newline)
  // padded to a multiple of 64.
  const std::size_t base = 6 + 2 + 2 + header.size() + 1;
  const std::size_t padded = (base + 63) / 64 * 64;
  header.append(padded - base, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Err::IO_FAILURE, "cannot open for writing: " + path.string());
  out.write(kMagic, 6);
  out.put('\x01');
  out.put('\x00');
  const std::uint16_t hlen = static_cast<std::uint16_t>(header.size());
  out.put(static_cast<char>(hlen & 0xff));
  out.put(static_cast<char>(hlen >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error(Err::IO_FAILURE, "write failed: " + path.string());
}

std::string header_field(const std::string& header, const std::string& key) {
  const std::size_t at = header.find("'" + key + "'");
  if (at == std::string::npos)
    throw Error(Err::DTYPE_UNSUPPORTED, "NPY header lacks key: " + key);
  std::size_t colon = header.find(':', at);
  if (colon == std::string::npos)
    throw Error(Err::DTYPE_UNSUPPORTED, "malformed NPY header");
  return header.substr(colon + 1);
}

}  // namespace

NpyArray read_array(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::IO_FAILURE, "cannot open: " + path.string());

  char magic[6];
  in.read(magic, 6);
  if (in.gcount() < 6) throw Error(Err::TRUNCATED_FILE, "file shorter than the magic");
  if (std::memcmp(magic, kMagic, 6) != 0)
    throw Error(Err::MAGIC_MISMATCH, "not an NPY file: " + path.string());

  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  if (in.gcount() < 2) throw Error(Err::TRUNCATED_FILE, "truncated version field");
  if (version[0] != 1 || version[1] != 0)
    throw Error(Err::DTYPE_UNSUPPORTED, "only NPY format version 1.0 is supported");

  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  if (in.gcount() < 2) throw Error(Err::TRUNCATED_FILE, "truncated header length");
  const std::size_t hlen = len_bytes[0] | (len_bytes[1] << 8);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (static_cast<std::size_t>(in.gcount()) < hlen)
    throw Error(Err::TRUNCATED_FILE, "truncated header");

  // descr
  const std::string descr_part = header_field(header, "descr");
  const std::size_t q1 = descr_part.find('\'');
  const std::size_t q2 = descr_part.find('\'', q1 + 1);
  if (q1 == std::string::npos || q2 == std::string::npos)
    throw Error(Err::DTYPE_UNSUPPORTED, "malformed descr");
  const std::string descr = descr_part.substr(q1 + 1, q2 - q1 - 1);

  // fortran_order
  const std::string order_part = header_field(header, "fortran_order");
  if (order_part.find("True") != std::string::npos &&
      (order_part.find("False") == std::string::npos ||
       order_part.find("True") < order_part.find("False")))
    throw Error(Err::DTYPE_UNSUPPORTED,
                "Fortran-order arrays are not supported; save C-order");

  // shape
  const std::string shape_part = header_field(header, "shape");
  const std::size_t p1 = shape_part.find('(');
  const std::size_t p2 = shape_part.find(')', p1);
  if (p1 == std::string::npos || p2 == std::string::npos)
    throw Error(Err::DTYPE_UNSUPPORTED, "malformed shape");
  NpyArray arr;
  std::string token;
  for (std::size_t i = p1 + 1; i <= p2; ++i) {
    const char c = shape_part[i];
    if (c == ',' || c == ')') {
      if (!token.empty()) arr.shape.push_back(std::stoll(token));
      token.clear();
    } else if (c != ' ') {
      token += c;
    }
  }
  if (arr.shape.empty())
    throw Error(Err::DTYPE_UNSUPPORTED, "zero-rank arrays are not supported");

  const std::int64_t n = numel(arr.shape);
  if (descr == "<f8") {
    arr.f64.resize(n);
    in.read(reinterpret_cast<char*>(arr.f64.data()),
            static_cast<std::streamsize>(n * 8));
    if (in.gcount() < n * 8)
      throw Error(Err::TRUNCATED_FILE, "payload shorter than the shape claims");
  } else if (descr == "|u1") {
    arr.is_u8 = true;
    arr.u8.resize(n);
    in.read(reinterpret_cast<char*>(arr.u8.data()),
            static_cast<std::streamsize>(n));
    if (in.gcount() < n)
      throw Error(Err::TRUNCATED_FILE, "payload shorter than the shape claims");
  } else {
    throw Error(Err::DTYPE_UNSUPPORTED,
                "unsupported dtype '" + descr + "' (expected <f8 or |u1)");
  }
  return arr;
}

void write_array(const fs::path& path, const std::vector<std::int64_t>& shape,
                 const std::vector<double>& data) {
  if (numel(shape) != static_cast<std::int64_t>(data.size()))
    throw Error(Err::SHAPE_MISMATCH, "array size does not match shape");
  write_npy(path, shape, data.data(), data.size() * 8, "<f8");
}

void write_array(const fs::path& path, const std::vector<std::int64_t>& shape,
                 const std::vector<std::uint8_t>& data) {
  if (numel(shape) != static_cast<std::int64_t>(data.size()))
    throw Error(Err::SHAPE_MISMATCH, "array size does not match shape");
  write_npy(path, shape, data.data(), data.size(), "|u1");
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::IO_FAILURE, "cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Err::CONFIG_INVALID,
                "manifest is not valid JSON: " + std::string(e.what()));
  }

  Manifest m;
  m.dataset = j.value("dataset", "");
  m.format_version = j.value("format_version", std::int64_t{0});
  if (m.format_version != 1)
    throw Error(Err::CONFIG_INVALID, "unrecognized manifest format_version");
  std::set<std::string> seen;
  for (const auto& jc : j.value("cases", json::array())) {
    ManifestCase c;
    c.case_id = jc.at("case_id").get<std::string>();
    if (!seen.insert(c.case_id).second)
      throw Error(Err::CONFIG_INVALID, "duplicate case_id: " + c.case_id);
    c.split = split_from_string(jc.value("split", "iid"));
    c.role = role_from_string(jc.value("role", "test"));
    c.image = jc.value("image", "");
    c.raters = jc.value("raters", "");
    c.stack = jc.value("stack", "");
    for (const auto& t : jc.value("scenario_tags", json::array()))
      c.scenario_tags.push_back(t.get<std::string>());
    m.cases.push_back(std::move(c));
  }
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  json cases = json::array();
  for (const auto& c : m.cases) {
    json jc{{"case_id", c.case_id},
            {"split", std::string(to_string(c.split))},
            {"role", std::string(to_string(c.role))},
            {"scenario_tags", c.scenario_tags}};
    if (!c.image.empty()) jc["image"] = c.image;
    if (!c.raters.empty()) jc["raters"] = c.raters;
    if (!c.stack.empty()) jc["stack"] = c.stack;
    cases.push_back(std::move(jc));
  }
  json j{{"dataset", m.dataset},
         {"format_version", m.format_version},
         {"cases", std::move(cases)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Err::IO_FAILURE, "cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw Error(Err::IO_FAILURE, "manifest write failed");
}

CaseRecord load_case(const ManifestCase& mc, const fs::path& base) {
  CaseRecord rec;
  rec.case_id = mc.case_id;
  rec.split = mc.split;
  rec.role = mc.role;
  rec.scenario_tags = mc.scenario_tags;

  if (!mc.image.empty()) {
    NpyArray a = read_array(base / mc.image);
    if (a.is_u8) throw Error(Err::DTYPE_UNSUPPORTED, "image must be float64");
    rec.spatial = a.shape;
    rec.image = std::move(a.f64);
  }
  if (!mc.raters.empty()) {
    NpyArray a = read_array(base / mc.raters);
    if (!a.is_u8) throw Error(Err::DTYPE_UNSUPPORTED, "rater masks must be uint8");
    if (a.shape.size() < 2)
      throw Error(Err::SHAPE_MISMATCH, "rater array needs a leading rater axis");
    RaterSet r;
    r.raters = a.shape[0];
    r.spatial.assign(a.shape.begin() + 1, a.shape.end());
    r.masks = std::move(a.u8);
    if (!rec.spatial.empty() && rec.spatial != r.spatial)
      throw Error(Err::SHAPE_MISMATCH, "raters disagree with image shape");
    if (rec.spatial.empty()) rec.spatial = r.spatial;
    rec.raters = std::move(r);
  }
  if (!mc.stack.empty()) {
    NpyArray a = read_array(base / mc.stack);
    if (a.is_u8) throw Error(Err::DTYPE_UNSUPPORTED, "stack must be float64");
    if (a.shape.size() < 3)
      throw Error(Err::SHAPE_MISMATCH, "stack needs sample and class axes");
    ProbabilityStack st;
    st.samples = a.shape[0];
    st.classes = a.shape[1];
    st.spatial.assign(a.shape.begin() + 2, a.shape.end());
    st.data = std::move(a.f64);
    if (!rec.spatial.empty() && rec.spatial != st.spatial)
      throw Error(Err::SHAPE_MISMATCH, "stack disagrees with case shape");
    if (rec.spatial.empty()) rec.spatial = st.spatial;
    rec.stack = std::move(st);
  }
  return rec;
}

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr const char* kReportHeader =
    "scenario,task,family,measure,claimed_type,aggregation,split,seed,value,note";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

std::string report_to_csv(const StudyReport& report) {
  StudyReport sorted = report;
  sort_report(sorted);
  std::string out = kReportHeader;
  out += "\n";
  for (const auto& r : sorted.rows) {
    out += r.scenario + "," + r.task + "," + r.family + "," + r.measure + "," +
           r.claimed_type + "," + r.aggregation + "," + r.split + "," +
           std::to_string(r.seed) + "," + fmt6(r.value) + "," + r.note + "\n";
  }
  return out;
}

StudyReport report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader)
    throw Error(Err::CONFIG_INVALID, "unrecognized report header");
  StudyReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 10)
      throw Error(Err::CONFIG_INVALID, "report row needs 10 fields");
    ReportRow r;
    r.scenario = f[0];
    r.task = f[1];
    r.family = f[2];
    r.measure = f[3];
    r.claimed_type = f[4];
    r.aggregation = f[5];
    r.split = f[6];
    r.seed = std::stoull(f[7]);
    r.value = std::stod(f[8]);
    r.note = f[9];
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

std::string report_to_json(const StudyReport& report) {
  StudyReport sorted = report;
  sort_report(sorted);
  json rows = json::array();
  for (const auto& r : sorted.rows) {
    rows.push_back(json{{"scenario", r.scenario},
                        {"task", r.task},
                        {"family", r.family},
                        {"measure", r.measure},
                        {"claimed_type", r.claimed_type},
                        {"aggregation", r.aggregation},
                        {"split", r.split},
                        {"seed", r.seed},
                        {"value", r.value},
                        {"note", r.note}});
  }
  return json{{"rows", std::move(rows)}}.dump(2) + "\n";
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "scenario,task,family,measure,claimed_type,aggregation,split,mean,sd,n\n";
  for (const auto& r : rows) {
    out += r.scenario + "," + r.task + "," + r.family + "," + r.measure + "," +
           r.claimed_type + "," + r.aggregation + "," + r.split + "," +
           fmt6(r.mean) + "," + fmt6(r.sd) + "," + std::to_string(r.n) + "\n";
  }
  return out;
}

std::string improvements_to_csv(const std::vector<ComponentImprovement>& rows,
                                Component component, const std::string& task) {
  std::string out = "component,task,value,improvement,sd,count\n";
  for (const auto& r : rows) {
    out += std::string(to_string(component)) + "," + task + "," + r.value +
           "," + fmt6(r.improvement) + "," + fmt6(r.sd) + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

double heatmap_bound(ModelFamily family) {
  return family == ModelFamily::DETERMINISTIC ? 0.5 : 0.7;
}

void export_heatmap(const UncertaintyMap& map, ModelFamily family,
                    const std::string& case_id, const fs::path& base_path) {
  const double bound = heatmap_bound(family);
  std::vector<double> scaled(map.data.size());
  for (std::size_t i = 0; i < map.data.size(); ++i)
    scaled[i] = std::min(std::max(map.data[i], 0.0), bound) / bound;
  fs::path npy = base_path;
  npy += ".npy";
  write_array(npy, map.spatial, scaled);

  json meta{{"case_id", case_id},
            {"family", std::string(to_string(family))},
            {"measure", std::string(to_string(map.measure))},
            {"claimed_type", std::string(to_string(map.claimed_type))},
            {"normalization_lower", 0.0},
            {"normalization_upper", bound}};
  fs::path mj = base_path;
  mj += ".json";
  std::ofstream out(mj, std::ios::trunc);
  if (!out) throw Error(Err::IO_FAILURE, "cannot write heatmap metadata");
  out << meta.dump(2) << "\n";
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.grid.families = {ModelFamily::DETERMINISTIC, ModelFamily::TTD,
                       ModelFamily::ENSEMBLE, ModelFamily::TTA,
                       ModelFamily::SSN};
  cfg.grid.aggregations = {
      {Aggregation::IMAGE_SUM, 10, std::nullopt},
      {Aggregation::PATCH_MAX, 10, std::nullopt},
      {Aggregation::THRESHOLD_MEAN, 10, std::nullopt},
  };
  cfg.grid.seeds = {1, 2, 3, 4, 5};
  return cfg;
}

namespace {

json config_to_json(const RunConfig& cfg) {
  json aggs = json::array();
  for (const auto& a : cfg.grid.aggregations) {
    json ja{{"strategy", std::string(to_string(a.strategy))},
            {"window_edge", a.window_edge}};
    if (a.threshold) ja["threshold"] = *a.threshold;
    aggs.push_back(std::move(ja));
  }
  json families = json::array();
  for (ModelFamily f : cfg.grid.families)
    families.push_back(std::string(to_string(f)));

  json al = json::object();
  for (const auto& [family, d] : cfg.downstream.al_dice) al[family] = d;

  return json{
      {"scenario", cfg.scenario},
      {"separation_scenarios", cfg.separation_scenarios},
      {"master_seed", cfg.master_seed},
      {"volume_edge", cfg.volume_edge},
      {"n_val", cfg.n_val},
      {"n_pool", cfg.n_pool},
      {"grid",
       {{"families", std::move(families)},
        {"aggregations", std::move(aggs)},
        {"seeds", cfg.grid.seeds}}},
      {"simulator",
       {{"n_samples", cfg.grid.base_sim.n_samples},
        {"fidelity", cfg.grid.base_sim.fidelity},
        {"sample_spread", cfg.grid.base_sim.sample_spread},
        {"ood_spread_multiplier", cfg.grid.base_sim.ood_spread_multiplier},
        {"border_softness", cfg.grid.base_sim.border_softness}}},
      {"downstream",
       {{"ace_bins", cfg.downstream.ace_bins},
        {"calib_max_pixels", cfg.downstream.calib_max_pixels},
        {"fd_oracle_confidence", cfg.downstream.fd_oracle_confidence},
        {"al_dice", std::move(al)}}},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg = default_run_config();
  try {
    cfg.scenario = j.value("scenario", cfg.scenario);
    if (j.contains("separation_scenarios"))
      cfg.separation_scenarios =
          j["separation_scenarios"].get<std::vector<std::string>>();
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.volume_edge = j.value("volume_edge", cfg.volume_edge);
    cfg.n_val = j.value("n_val", cfg.n_val);
    cfg.n_pool = j.value("n_pool", cfg.n_pool);
    if (j.contains("grid")) {
      const json& g = j["grid"];
      if (g.contains("families")) {
        cfg.grid.families.clear();
        for (const auto& f : g["families"])
          cfg.grid.families.push_back(family_from_string(f.get<std::string>()));
      }
      if (g.contains("aggregations")) {
        cfg.grid.aggregations.clear();
        for (const auto& ja : g["aggregations"]) {
          AggregationSpec a;
          a.strategy = aggregation_from_string(ja.at("strategy").get<std::string>());
          a.window_edge = ja.value("window_edge", std::int64_t{10});
          if (ja.contains("threshold")) a.threshold = ja["threshold"].get<double>();
          cfg.grid.aggregations.push_back(a);
        }
      }
      if (g.contains("seeds"))
        cfg.grid.seeds = g["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (j.contains("simulator")) {
      const json& s = j["simulator"];
      SimulatorConfig& sim = cfg.grid.base_sim;
      sim.n_samples = s.value("n_samples", sim.n_samples);
      sim.fidelity = s.value("fidelity", sim.fidelity);
      sim.sample_spread = s.value("sample_spread", sim.sample_spread);
      sim.ood_spread_multiplier =
          s.value("ood_spread_multiplier", sim.ood_spread_multiplier);
      sim.border_softness = s.value("border_softness", sim.border_softness);
    }
    if (j.contains("downstream")) {
      const json& d = j["downstream"];
      cfg.downstream.ace_bins = d.value("ace_bins", cfg.downstream.ace_bins);
      cfg.downstream.calib_max_pixels =
          d.value("calib_max_pixels", cfg.downstream.calib_max_pixels);
      cfg.downstream.fd_oracle_confidence =
          d.value("fd_oracle_confidence", cfg.downstream.fd_oracle_confidence);
      if (d.contains("al_dice"))
        for (const auto& [family, quad] : d["al_dice"].items())
          cfg.downstream.al_dice[family] = quad.get<std::array<double, 4>>();
    }
  } catch (const json::exception& e) {
    throw Error(Err::CONFIG_INVALID,
                "config does not match the expected schema: " +
                    std::string(e.what()));
  }
  return cfg;
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::IO_FAILURE, "cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(Err::CONFIG_INVALID,
                "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Err::IO_FAILURE, "cannot write config: " + path.string());
  out << config_to_json(cfg).dump(2) << "\n";
  if (!out) throw Error(Err::IO_FAILURE, "config write failed");
}

std::string run_config_to_json_text(const RunConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Err::CONFIG_INVALID,
                "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::filesystem::path allocate_run_dir(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(Err::IO_FAILURE, "cannot create: " + root.string());
  std::int64_t next = 1;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run-", 0) != 0) continue;
    const std::int64_t n = std::atoll(name.c_str() + 4);
    next = std::max(next, n + 1);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%04lld", static_cast<long long>(next));
  const fs::path dir = root / buf;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Err::IO_FAILURE, "cannot create: " + dir.string());
  return dir;
}

}  // namespace uqseg
