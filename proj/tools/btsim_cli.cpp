// Command-line front end. Talks to the simulator only through the C API.

#include "btsim/btsim.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

int report(btsim_status st) {
  if (st != BTSIM_OK) std::fprintf(stderr, "btsim: %s\n", btsim_last_error());
  return static_cast<int>(st);
}

struct RunFlags {
  std::string config;
  std::string mesh_file;
  std::optional<int> multi;
  std::vector<double> b;
  std::optional<double> kappa, delta, big_delta, dt, diffusion, theta;
  std::vector<double> gdir;
  std::string csv, svg, bc;
  bool log_scale = false;
  std::optional<int> threads;
};

// Builds a merge patch from the command-line overrides. Needs the original
// document only to rewrite every compartment's D for -K.
std::optional<json> overrides(const RunFlags& f, const json& doc) {
  json patch = json::object();
  if (!f.mesh_file.empty()) {
    const bool msh = f.mesh_file.size() >= 4 && f.mesh_file.compare(f.mesh_file.size() - 4, 4, ".msh") == 0;
    // Null every configured mesh key so the file replaces the mesh wholesale.
    json mesh = json::object();
    if (doc.contains("mesh") && doc["mesh"].is_object()) {
      for (const auto& item : doc["mesh"].items()) mesh[item.key()] = nullptr;
    }
    mesh[msh ? "msh" : "native"] = std::filesystem::absolute(f.mesh_file).string();
    patch["mesh"] = mesh;
  }
  if (f.multi) patch["multi_compartment"] = *f.multi;
  if (!f.b.empty()) patch["gradient"]["b_values_s_per_mm2"] = f.b;
  if (!f.b.empty()) patch["gradient"]["g_T_per_um"] = nullptr;
  if (!f.gdir.empty()) patch["gradient"]["direction"] = f.gdir;
  if (f.kappa) patch["permeability_m_per_s"] = *f.kappa;
  if (f.delta) patch["sequence"]["delta_us"] = *f.delta, patch["sequence"]["delta_ms"] = nullptr;
  if (f.big_delta) patch["sequence"]["Delta_us"] = *f.big_delta, patch["sequence"]["Delta_ms"] = nullptr;
  if (f.dt) patch["time"]["dt_us"] = *f.dt, patch["time"]["dt_ms"] = nullptr;
  if (f.theta) patch["time"]["theta"] = *f.theta;
  if (!f.bc.empty()) patch["bc"] = f.bc;
  if (f.threads) patch["threads"] = *f.threads;
  if (!f.csv.empty()) patch["output"]["csv"] = f.csv;
  if (!f.svg.empty()) patch["output"]["svg"] = f.svg;
  if (f.log_scale) patch["output"]["log_scale"] = true;
  if (f.diffusion) {
    json comps = doc.value("compartments", json::array());
    for (auto& c : comps) {
      if (c.is_object()) c["D_mm2_per_s"] = *f.diffusion;
    }
    patch["compartments"] = comps;
  }
  if (patch.empty()) return std::nullopt;
  return patch;
}

int run_command(const RunFlags& f) {
  btsim_config* cfg = nullptr;
  if (int st = report(btsim_config_load_file(f.config.c_str(), &cfg))) return st;
  json doc;
  {
    std::ifstream in(f.config);
    doc = json::parse(in, nullptr, false);
  }
  if (auto patch = overrides(f, doc)) {
    if (int st = report(btsim_config_merge_patch(cfg, patch->dump().c_str()))) {
      btsim_config_free(cfg);
      return st;
    }
  }
  btsim_result* res = nullptr;
  int st = report(btsim_run(cfg, &res));
  if (st == 0) {
    st = report(btsim_result_write_outputs(res, cfg));
    std::printf("b_s_per_mm2,attenuation,S_re,S_im\n");
    for (size_t i = 0; i < btsim_result_size(res); ++i) {
      btsim_signal_record r;
      btsim_result_get(res, i, &r);
      std::printf("%.10g,%.10g,%.10g,%.10g\n", r.b_s_per_mm2, r.attenuation, r.s_re, r.s_im);
    }
  }
  btsim_result_free(res);
  btsim_config_free(cfg);
  return st;
}

// Accept single-dash long flags such as -gdir.
std::vector<std::string> normalise_args(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "-gdir") a = "--gdir";
    args.push_back(a);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch-Torrey diffusion MRI simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(btsim_version()));

  RunFlags rf;
  auto* run = app.add_subcommand("run", "simulate the signal for a JSON configuration");
  run->add_option("config", rf.config, "configuration file")->required();
  run->add_option("-f,--mesh", rf.mesh_file, "mesh file (.msh or native) replacing the configured mesh");
  run->add_option("-M", rf.multi, "multi-compartment flag (checked against the markers)");
  run->add_option("-b", rf.b, "b-values in s/mm²");
  run->add_option("-p", rf.kappa, "permeability in m/s");
  run->add_option("-d", rf.delta, "pulse duration delta in µs");
  run->add_option("-D", rf.big_delta, "pulse separation Delta in µs");
  run->add_option("-k,--dt", rf.dt, "time step in µs");
  run->add_option("-K", rf.diffusion, "diffusion coefficient in mm²/s for every compartment");
  run->add_option("--gdir", rf.gdir, "gradient direction (3 components)")->expected(1, 3);
  run->add_option("--theta", rf.theta, "theta-method parameter");
  run->add_option("--bc", rf.bc, "neumann | periodic_strong | periodic_weak");
  run->add_option("--threads", rf.threads, "worker threads");
  run->add_option("--csv", rf.csv, "CSV output path");
  run->add_option("--svg", rf.svg, "SVG output path");
  run->add_flag("--log-scale", rf.log_scale, "logarithmic attenuation axis in the SVG");

  std::string oracle_config, oracle_csv;
  std::vector<double> lengths, diffusivities, kappas, t2s;
  int cells = 1000;
  auto* oracle = app.add_subcommand("oracle", "finite-difference interval reference signal");
  oracle->add_option("config", oracle_config, "configuration (sequence, gradient, time)")->required();
  oracle->add_option("--lengths", lengths, "region lengths in µm")->required();
  oracle->add_option("--D", diffusivities, "region diffusivities in mm²/s")->required();
  oracle->add_option("--kappa", kappas, "interface permeabilities in m/s");
  oracle->add_option("--T2", t2s, "region T2 in µs");
  oracle->add_option("--cells", cells, "total grid cells");
  oracle->add_option("--csv", oracle_csv, "CSV output path");

  std::string convert_in, convert_out;
  auto* convert = app.add_subcommand("convert", "convert a mesh to the native text format");
  convert->add_option("input", convert_in, "input mesh (.msh or native)")->required();
  convert->add_option("output", convert_out, "output path")->required();

  auto args = normalise_args(argc, argv);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : BTSIM_ERROR_CONFIG;
  }

  if (*run) return run_command(rf);
  if (*oracle) {
    if (diffusivities.size() != lengths.size() || (!t2s.empty() && t2s.size() != lengths.size()) ||
        kappas.size() + 1 != lengths.size()) {
      std::fprintf(stderr, "btsim: --D/--T2 need one value per region and --kappa one per interface\n");
      return BTSIM_ERROR_CONFIG;
    }
    btsim_config* cfg = nullptr;
    if (int st = report(btsim_config_load_file(oracle_config.c_str(), &cfg))) return st;
    btsim_result* res = nullptr;
    int st = report(btsim_oracle_run(cfg, lengths.size(), lengths.data(), diffusivities.data(),
                                     t2s.empty() ? nullptr : t2s.data(), kappas.data(), cells, &res));
    if (st == 0) {
      if (!oracle_csv.empty()) st = report(btsim_result_write_csv(res, oracle_csv.c_str()));
      std::printf("b_s_per_mm2,attenuation,S_re,S_im\n");
      for (size_t i = 0; i < btsim_result_size(res); ++i) {
        btsim_signal_record r;
        btsim_result_get(res, i, &r);
        std::printf("%.17g,%.17g,%.17g,%.17g\n", r.b_s_per_mm2, r.attenuation, r.s_re, r.s_im);
      }
    }
    btsim_result_free(res);
    btsim_config_free(cfg);
    return st;
  }
  if (*convert) return report(btsim_mesh_convert(convert_in.c_str(), convert_out.c_str()));
  return BTSIM_ERROR_CONFIG;
}
