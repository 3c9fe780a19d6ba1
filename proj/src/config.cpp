#include "btsim/config.hpp"

#include "btsim/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace btsim {
namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::kConfiguration, msg); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) config_error(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) config_error(where + " must be a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) config_error(where + " must be an integer");
  return v.get<int>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) config_error(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, where));
  return out;
}

std::vector<int> integers(const json& v, const std::string& where) {
  if (!v.is_array()) config_error(where + " must be an array of integers");
  std::vector<int> out;
  for (const auto& x : v) out.push_back(integer(x, where));
  return out;
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) config_error(where + " must be a string");
  return v.get<std::string>();
}

// Exactly one of the unit-suffixed keys may be present; returns the value in µs.
std::optional<double> time_us(const json& obj, const std::string& stem, const std::string& where) {
  const bool us = obj.contains(stem + "_us"), ms = obj.contains(stem + "_ms");
  if (us && ms) config_error(where + ": give only one of " + stem + "_us / " + stem + "_ms");
  if (us) return number(obj[stem + "_us"], where + "." + stem + "_us");
  if (ms) return 1e3 * number(obj[stem + "_ms"], where + "." + stem + "_ms");
  return std::nullopt;
}

Mat3 diffusion_tensor(const json& v, const std::string& where) {
  if (v.is_number()) return number(v, where) * Mat3::Identity();
  if (!v.is_array() || v.empty() || v.size() > 3) config_error(where + " must be a number or a square matrix");
  const std::size_t n = v.size();
  // Unused trailing dimensions get the mean diagonal so the tensor stays SPD.
  Mat3 d = Mat3::Zero();
  double trace = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!v[r].is_array() || v[r].size() != n) config_error(where + " must be a square matrix");
    for (std::size_t c = 0; c < n; ++c) d(r, c) = number(v[r][c], where);
    trace += d(r, r);
  }
  for (std::size_t r = n; r < 3; ++r) d(r, r) = trace / n;
  return d;
}

MeshSource parse_mesh(const json& m, const std::string& base_dir) {
  MeshSource src;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
    return path.string();
  };
  if (!m.is_object()) config_error("mesh must be an object");
  if (m.contains("msh")) {
    check_keys(m, {"msh"}, "mesh");
    src.kind = MeshSource::Kind::kMsh;
    src.path = resolve(text(m["msh"], "mesh.msh"));
    return src;
  }
  if (m.contains("native")) {
    check_keys(m, {"native"}, "mesh");
    src.kind = MeshSource::Kind::kNative;
    src.path = resolve(text(m["native"], "mesh.native"));
    return src;
  }
  if (!m.contains("builtin")) config_error("mesh needs one of builtin, msh, native");
  const std::string kind = text(m["builtin"], "mesh.builtin");
  if (kind == "box") {
    check_keys(m, {"builtin", "p0_um", "p1_um", "n", "marker_split"}, "mesh");
    src.kind = MeshSource::Kind::kBox;
    if (!m.contains("p0_um") || !m.contains("p1_um") || !m.contains("n")) {
      config_error("box mesh needs p0_um, p1_um and n");
    }
    src.p0 = numbers(m["p0_um"], "mesh.p0_um");
    src.p1 = numbers(m["p1_um"], "mesh.p1_um");
    src.n = integers(m["n"], "mesh.n");
    if (m.contains("marker_split")) {
      const auto& s = m["marker_split"];
      check_keys(s, {"axis", "at_um"}, "mesh.marker_split");
      src.split_axis = s.contains("axis") ? integer(s["axis"], "mesh.marker_split.axis") : 0;
      if (!s.contains("at_um")) config_error("mesh.marker_split needs at_um");
      src.split_at = numbers(s["at_um"], "mesh.marker_split.at_um");
    }
  } else if (kind == "layered_disk") {
    check_keys(m, {"builtin", "radii_um", "radial_cells", "segments"}, "mesh");
    src.kind = MeshSource::Kind::kLayeredDisk;
    if (!m.contains("radii_um") || !m.contains("radial_cells") || !m.contains("segments")) {
      config_error("layered_disk mesh needs radii_um, radial_cells and segments");
    }
    src.radii = numbers(m["radii_um"], "mesh.radii_um");
    src.radial_cells = integers(m["radial_cells"], "mesh.radial_cells");
    src.segments = integer(m["segments"], "mesh.segments");
  } else if (kind == "branched_tree") {
    check_keys(m, {"builtin", "levels", "root_length_um", "cells_per_branch"}, "mesh");
    src.kind = MeshSource::Kind::kBranchedTree;
    if (!m.contains("levels") || !m.contains("root_length_um") || !m.contains("cells_per_branch")) {
      config_error("branched_tree mesh needs levels, root_length_um and cells_per_branch");
    }
    src.levels = integer(m["levels"], "mesh.levels");
    src.root_length = number(m["root_length_um"], "mesh.root_length_um");
    src.cells_per_branch = integer(m["cells_per_branch"], "mesh.cells_per_branch");
  } else {
    config_error("unknown builtin mesh '" + kind + "'");
  }
  return src;
}

BoundaryMode parse_bc(const std::string& s) {
  if (s == "neumann") return BoundaryMode::kNeumann;
  if (s == "periodic_strong") return BoundaryMode::kPeriodicStrong;
  if (s == "periodic_weak") return BoundaryMode::kPeriodicWeak;
  config_error("bc must be neumann, periodic_strong or periodic_weak");
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  check_keys(doc, {"mesh", "compartments", "permeability_m_per_s", "sequence", "gradient", "time", "bc",
                   "formulation", "solver", "threads", "multi_compartment", "output"},
             "config");
  RunConfig cfg;
  if (!doc.contains("mesh")) config_error("config needs a mesh");
  cfg.mesh = parse_mesh(doc["mesh"], base_dir);

  if (!doc.contains("compartments") || !doc["compartments"].is_array() || doc["compartments"].empty()) {
    config_error("config needs a non-empty compartments array");
  }
  for (const auto& c : doc["compartments"]) {
    check_keys(c, {"marker", "D_mm2_per_s", "T2_ms", "T2_us", "ic"}, "compartment");
    Compartment comp;
    comp.marker = c.contains("marker") ? integer(c["marker"], "compartment.marker") : -1;
    if (!c.contains("D_mm2_per_s")) config_error("compartment needs D_mm2_per_s");
    comp.diffusion = diffusion_tensor(c["D_mm2_per_s"], "compartment.D_mm2_per_s");
    if (auto t2 = time_us(c, "T2", "compartment")) comp.t2 = *t2;
    if (c.contains("ic")) comp.initial = number(c["ic"], "compartment.ic");
    cfg.compartments.push_back(comp);
  }
  if (doc.contains("permeability_m_per_s")) {
    cfg.kappa = number(doc["permeability_m_per_s"], "permeability_m_per_s");  // m/s = µm/µs
  }

  if (!doc.contains("sequence")) config_error("config needs a sequence");
  const auto& s = doc["sequence"];
  check_keys(s, {"type", "delta_us", "delta_ms", "Delta_us", "Delta_ms", "n", "ramp_us", "ramp_ms"}, "sequence");
  if (s.contains("type")) cfg.sequence.type = text(s["type"], "sequence.type");
  auto delta = time_us(s, "delta", "sequence");
  auto big_delta = time_us(s, "Delta", "sequence");
  if (!delta || !big_delta) config_error("sequence needs delta and Delta");
  cfg.sequence.delta = *delta;
  cfg.sequence.big_delta = *big_delta;
  if (s.contains("n")) cfg.sequence.periods = integer(s["n"], "sequence.n");
  if (auto r = time_us(s, "ramp", "sequence")) cfg.sequence.ramp = *r;

  if (!doc.contains("gradient")) config_error("config needs a gradient");
  const auto& g = doc["gradient"];
  check_keys(g, {"direction", "b_values_s_per_mm2", "g_T_per_um"}, "gradient");
  if (g.contains("direction")) {
    auto d = numbers(g["direction"], "gradient.direction");
    if (d.empty() || d.size() > 3) config_error("gradient.direction needs 1 to 3 components");
    Vec3 v = Vec3::Zero();
    for (std::size_t k = 0; k < d.size(); ++k) v[k] = d[k];
    if (!(v.norm() > 0.0)) config_error("gradient.direction must be nonzero");
    cfg.direction = v.normalized();
  }
  const bool has_b = g.contains("b_values_s_per_mm2"), has_g = g.contains("g_T_per_um");
  if (has_b == has_g) config_error("gradient needs exactly one of b_values_s_per_mm2 and g_T_per_um");
  if (has_b) cfg.b_values = numbers(g["b_values_s_per_mm2"], "gradient.b_values_s_per_mm2");
  if (has_g) cfg.g_values = numbers(g["g_T_per_um"], "gradient.g_T_per_um");
  for (double b : cfg.b_values) {
    if (!(b >= 0.0)) config_error("b-values must be non-negative");
  }
  for (double x : cfg.g_values) {
    if (!(x >= 0.0)) config_error("gradient amplitudes must be non-negative");
  }

  if (doc.contains("time")) {
    const auto& t = doc["time"];
    check_keys(t, {"dt_us", "dt_ms", "theta"}, "time");
    if (auto dt = time_us(t, "dt", "time")) cfg.dt = *dt;
    if (t.contains("theta")) cfg.theta = number(t["theta"], "time.theta");
  }
  if (doc.contains("bc")) cfg.boundary = parse_bc(text(doc["bc"], "bc"));
  if (doc.contains("formulation")) {
    const auto f = text(doc["formulation"], "formulation");
    if (f == "direct") cfg.formulation = Formulation::kDirect;
    else if (f == "transformed") cfg.formulation = Formulation::kTransformed;
    else if (f != "auto") config_error("formulation must be auto, direct or transformed");
  }
  if (doc.contains("solver")) {
    const auto& sv = doc["solver"];
    check_keys(sv, {"kind", "tolerance", "max_iterations", "restart"}, "solver");
    if (sv.contains("kind")) {
      const auto k = text(sv["kind"], "solver.kind");
      if (k == "auto") cfg.solver.kind = SolverKind::kAuto;
      else if (k == "direct") cfg.solver.kind = SolverKind::kDirect;
      else if (k == "iterative") cfg.solver.kind = SolverKind::kIterative;
      else config_error("solver.kind must be auto, direct or iterative");
    }
    if (sv.contains("tolerance")) cfg.solver.tolerance = number(sv["tolerance"], "solver.tolerance");
    if (sv.contains("max_iterations")) cfg.solver.max_iterations = integer(sv["max_iterations"], "solver.max_iterations");
    if (sv.contains("restart")) cfg.solver.restart = integer(sv["restart"], "solver.restart");
  }
  if (doc.contains("threads")) cfg.threads = integer(doc["threads"], "threads");
  if (doc.contains("multi_compartment")) {
    const auto& m = doc["multi_compartment"];
    if (m.is_boolean()) cfg.multi_compartment = m.get<bool>() ? 1 : 0;
    else cfg.multi_compartment = integer(m, "multi_compartment");
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    check_keys(o, {"csv", "svg", "log_scale"}, "output");
    if (o.contains("csv")) cfg.csv_path = text(o["csv"], "output.csv");
    if (o.contains("svg")) cfg.svg_path = text(o["svg"], "output.svg");
    if (o.contains("log_scale")) {
      if (!o["log_scale"].is_boolean()) config_error("output.log_scale must be a boolean");
      cfg.log_scale = o["log_scale"].get<bool>();
    }
  }
  if (!(cfg.dt > 0.0)) config_error("time step must be positive");
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) config_error("theta must lie in [0, 1]");
  if (!(cfg.kappa >= 0.0)) config_error("permeability must be non-negative");
  if (cfg.threads < 1) config_error("threads must be at least 1");
  return cfg;
}

std::string merge_config_patch(const std::string& json_text, const std::string& patch_text) {
  try {
    json doc = json::parse(json_text);
    doc.merge_patch(json::parse(patch_text));
    return doc.dump();
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
}

TemporalProfile make_profile(const SequenceSpec& s) {
  if (s.type == "pgse") return pgse(s.delta, s.big_delta);
  if (s.type == "double_pgse") return double_pgse(s.delta, s.big_delta);
  if (s.type == "cos_ogse") return cos_ogse(s.delta, s.big_delta, s.periods);
  if (s.type == "sin_ogse") return sin_ogse(s.delta, s.big_delta, s.periods);
  if (s.type == "trapezoidal_pgse") return trapezoidal_pgse(s.delta, s.big_delta, s.ramp);
  if (s.type == "double_trapezoidal_pgse") return double_trapezoidal_pgse(s.delta, s.big_delta, s.ramp);
  config_error("unknown sequence type '" + s.type + "'");
}

LoadedMesh load_mesh(const MeshSource& src) {
  switch (src.kind) {
    case MeshSource::Kind::kBox: {
      if (src.p0.size() != src.p1.size() || src.p0.size() != src.n.size()) {
        fail(ErrorKind::kInvalidArgument, "box mesh corners and counts must have equal length");
      }
      Mesh mesh = build_structured_mesh(src.p0, src.p1, src.n);
      CompartmentMarker marker(mesh.num_cells(), 0);
      if (!src.split_at.empty()) {
        if (src.split_axis < 0 || src.split_axis >= mesh.embed_dim()) {
          fail(ErrorKind::kInvalidArgument, "marker split axis outside the mesh dimension");
        }
        for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
          const double x = mesh.cells().centroid[c][src.split_axis];
          marker[c] = static_cast<int>(std::count_if(src.split_at.begin(), src.split_at.end(),
                                                     [&](double s) { return s < x; }));
        }
      }
      return {std::move(mesh), std::move(marker)};
    }
    case MeshSource::Kind::kLayeredDisk: {
      auto disk = build_layered_disk(src.radii, src.radial_cells, src.segments);
      return {std::move(disk.mesh), std::move(disk.marker)};
    }
    case MeshSource::Kind::kBranchedTree: {
      Mesh mesh = build_branched_tree(src.levels, src.root_length, src.cells_per_branch);
      CompartmentMarker marker(mesh.num_cells(), 0);
      return {std::move(mesh), std::move(marker)};
    }
    case MeshSource::Kind::kMsh: {
      auto imported = to_mesh(parse_msh(read_text_file(src.path)));
      return {std::move(imported.mesh), std::move(imported.marker)};
    }
    case MeshSource::Kind::kNative: {
      auto native = read_native(read_text_file(src.path));
      if (native.marker.empty()) native.marker.assign(native.mesh.num_cells(), 0);
      return {std::move(native.mesh), std::move(native.marker)};
    }
  }
  fail(ErrorKind::kConfiguration, "unknown mesh source");
}

std::vector<SignalRecord> run_config(const RunConfig& cfg) {
  LoadedMesh lm = load_mesh(cfg.mesh);
  const Mesh& mesh = lm.mesh;

  const Compartment* fallback = nullptr;
  std::map<int, const Compartment*> by_marker;
  for (const auto& c : cfg.compartments) {
    if (c.marker < 0) {
      if (fallback) config_error("only one compartment may omit its marker");
      fallback = &c;
    } else if (!by_marker.emplace(c.marker, &c).second) {
      config_error("duplicate compartment marker " + std::to_string(c.marker));
    }
  }
  CellCoefficients coeffs;
  std::vector<double> initial(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    auto it = by_marker.find(lm.marker[c]);
    const Compartment* comp = it != by_marker.end() ? it->second : fallback;
    if (!comp) config_error("no compartment entry for marker " + std::to_string(lm.marker[c]));
    coeffs.diffusion.push_back(comp->diffusion);
    coeffs.t2.push_back(comp->t2);
    initial[c] = comp->initial;
  }
  const PhaseFunction phase = phase_from_marker(lm.marker);
  const bool two_groups = std::any_of(phase.begin(), phase.end(), [](auto p) { return p == 1; }) &&
                          std::any_of(phase.begin(), phase.end(), [](auto p) { return p == 0; });
  if (cfg.multi_compartment && (*cfg.multi_compartment != 0) != two_groups) {
    config_error(two_groups ? "multi-compartment flag is 0 but the mesh has two marker parity groups"
                            : "multi-compartment flag is 1 but the mesh has a single marker parity group");
  }

  Simulation::Options opts;
  opts.boundary = cfg.boundary;
  opts.formulation = cfg.formulation.value_or(cfg.boundary == BoundaryMode::kPeriodicStrong
                                                  ? Formulation::kTransformed
                                                  : Formulation::kDirect);
  opts.kappa = cfg.kappa;
  opts.direction = cfg.direction;
  opts.assembly.threads = cfg.threads;
  const Simulation sim(mesh, phase, coeffs, initial, opts);

  const TemporalProfile profile = make_profile(cfg.sequence);
  std::vector<double> b = cfg.b_values, g = cfg.g_values;
  if (!b.empty()) {
    for (double x : b) g.push_back(g_from_b(profile, x));
  } else {
    for (double x : g) b.push_back(b_from_g(profile, x));
  }
  StepperConfig sc;
  sc.theta = cfg.theta;
  sc.dt = cfg.dt;
  sc.solver = cfg.solver;
  sc.threads = cfg.threads;
  return sim.run_amplitudes(profile, g, b, sc);
}

std::string format_csv(const std::vector<SignalRecord>& records) {
  std::string out = "b,g,S_re,S_im,attenuation\n";
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.b, r.g, r.signal.real(),
                  r.signal.imag(), r.attenuation);
    out += line;
  }
  return out;
}

std::string format_svg(const std::vector<SignalRecord>& records, bool log_scale) {
  const double width = 640, height = 420, left = 70, right = 20, top = 20, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double bmax = 0.0;
  for (const auto& r : records) bmax = std::max(bmax, r.b);
  if (bmax <= 0.0) bmax = 1.0;
  double ymin = 0.0, ymax = 1.0;
  auto yval = [&](double a) { return log_scale ? std::log10(std::max(a, 1e-12)) : a; };
  if (log_scale) {
    ymax = 0.0;
    ymin = -1.0;
    for (const auto& r : records) ymin = std::min(ymin, std::floor(yval(r.attenuation)));
  }
  auto px = [&](double b) { return left + pw * b / bmax; };
  auto py = [&](double a) { return top + ph * (1.0 - (yval(a) - ymin) / (ymax - ymin)); };

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\""
     << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<g stroke=\"black\" fill=\"none\">\n"
     << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n"
     << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double b = bmax * k / 4;
    os << "<text x=\"" << px(b) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << b << "</text>\n";
  }
  const int yticks = log_scale ? static_cast<int>(ymax - ymin) : 4;
  for (int k = 0; k <= yticks; ++k) {
    const double v = ymin + (ymax - ymin) * k / std::max(yticks, 1);
    const double label = log_scale ? std::pow(10.0, v) : v;
    const double y = top + ph * (1.0 - (v - ymin) / (ymax - ymin));
    os << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
     << "\" text-anchor=\"middle\">b (s/mm²)</text>\n"
     << "<text transform=\"translate(16," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">attenuation</text>\n</g>\n";
  if (!records.empty()) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& r : records) os << px(r.b) << "," << py(r.attenuation) << " ";
    os << "\"/>\n";
    for (const auto& r : records) {
      os << "<circle cx=\"" << px(r.b) << "\" cy=\"" << py(r.attenuation) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

}  // namespace btsim
