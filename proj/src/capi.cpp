#include "btsim/btsim.h"

#include "btsim/config.hpp"
#include "btsim/error.hpp"
#include "btsim/oracle.hpp"

#include <filesystem>
#include <new>
#include <string>

struct btsim_config {
  std::string json;
  std::string base_dir;
  btsim::RunConfig parsed;
};

struct btsim_result {
  std::vector<btsim::SignalRecord> records;
};

namespace {

thread_local std::string g_last_error;

btsim_status status_for(btsim::ErrorKind kind) {
  using btsim::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kConfiguration:
    case ErrorKind::kNoEncoding:
    case ErrorKind::kDimension: return BTSIM_ERROR_CONFIG;
    case ErrorKind::kDegenerateGeometry:
    case ErrorKind::kPairingFailure:
    case ErrorKind::kParse:
    case ErrorKind::kFormat:
    case ErrorKind::kUnsupportedMesh:
    case ErrorKind::kSupport:
    case ErrorKind::kConstraint:
    case ErrorKind::kProjection: return BTSIM_ERROR_MESH;
    case ErrorKind::kSolverFailure:
    case ErrorKind::kInstability: return BTSIM_ERROR_SOLVER;
    case ErrorKind::kIo: return BTSIM_ERROR_IO;
  }
  return BTSIM_ERROR_INTERNAL;
}

template <class F>
btsim_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return BTSIM_OK;
  } catch (const btsim::Error& e) {
    g_last_error = std::string(btsim::to_string(e.kind())) + ": " + e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    g_last_error = "internal error";
  }
  return BTSIM_ERROR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) btsim::fail(btsim::ErrorKind::kInvalidArgument, std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* btsim_version(void) { return "1.0.0"; }

const char* btsim_last_error(void) { return g_last_error.c_str(); }

btsim_status btsim_config_load_string(const char* json, btsim_config** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    auto cfg = std::make_unique<btsim_config>();
    cfg->json = json;
    cfg->parsed = btsim::parse_config(cfg->json);
    *out = cfg.release();
  });
}

btsim_status btsim_config_load_file(const char* path, btsim_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto cfg = std::make_unique<btsim_config>();
    cfg->json = btsim::read_text_file(path);
    cfg->base_dir = std::filesystem::path(path).parent_path().string();
    cfg->parsed = btsim::parse_config(cfg->json, cfg->base_dir);
    *out = cfg.release();
  });
}

btsim_status btsim_config_merge_patch(btsim_config* cfg, const char* patch_json) {
  return guarded([&] {
    require(cfg, "config");
    require(patch_json, "patch");
    std::string merged = btsim::merge_config_patch(cfg->json, patch_json);
    cfg->parsed = btsim::parse_config(merged, cfg->base_dir);
    cfg->json = std::move(merged);
  });
}

void btsim_config_free(btsim_config* cfg) { delete cfg; }

btsim_status btsim_run(const btsim_config* cfg, btsim_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    auto res = std::make_unique<btsim_result>();
    res->records = btsim::run_config(cfg->parsed);
    *out = res.release();
  });
}

size_t btsim_result_size(const btsim_result* res) { return res ? res->records.size() : 0; }

btsim_status btsim_result_get(const btsim_result* res, size_t index, btsim_signal_record* out) {
  return guarded([&] {
    require(res, "result");
    require(out, "out");
    if (index >= res->records.size()) btsim::fail(btsim::ErrorKind::kInvalidArgument, "record index out of range");
    const auto& r = res->records[index];
    out->b_s_per_mm2 = r.b;
    out->g_T_per_um = r.g;
    for (int k = 0; k < 3; ++k) out->direction[k] = r.direction[k];
    out->s_re = r.signal.real();
    out->s_im = r.signal.imag();
    out->attenuation = r.attenuation;
  });
}

btsim_status btsim_result_write_csv(const btsim_result* res, const char* path) {
  return guarded([&] {
    require(res, "result");
    require(path, "path");
    btsim::write_text_file(path, btsim::format_csv(res->records));
  });
}

btsim_status btsim_result_write_svg(const btsim_result* res, const char* path, int log_scale) {
  return guarded([&] {
    require(res, "result");
    require(path, "path");
    btsim::write_text_file(path, btsim::format_svg(res->records, log_scale != 0));
  });
}

btsim_status btsim_result_write_outputs(const btsim_result* res, const btsim_config* cfg) {
  return guarded([&] {
    require(res, "result");
    require(cfg, "config");
    if (!cfg->parsed.csv_path.empty()) btsim::write_text_file(cfg->parsed.csv_path, btsim::format_csv(res->records));
    if (!cfg->parsed.svg_path.empty()) {
      btsim::write_text_file(cfg->parsed.svg_path, btsim::format_svg(res->records, cfg->parsed.log_scale));
    }
  });
}

void btsim_result_free(btsim_result* res) { delete res; }

btsim_status btsim_oracle_run(const btsim_config* cfg, size_t n_regions, const double* lengths_um,
                              const double* d_mm2_per_s, const double* t2_us, const double* kappa_m_per_s,
                              int grid_cells, btsim_result** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    require(lengths_um, "lengths");
    require(d_mm2_per_s, "diffusivities");
    if (n_regions == 0) btsim::fail(btsim::ErrorKind::kInvalidArgument, "need at least one region");
    if (n_regions > 1) require(kappa_m_per_s, "permeabilities");
    btsim::FdConfig fd;
    for (size_t r = 0; r < n_regions; ++r) {
      btsim::FdRegion reg;
      reg.length = lengths_um[r];
      reg.diffusion = d_mm2_per_s[r];
      if (t2_us && t2_us[r] > 0) reg.t2 = t2_us[r];
      fd.regions.push_back(reg);
      if (r + 1 < n_regions) fd.kappa.push_back(kappa_m_per_s[r]);
    }
    fd.n = grid_cells;
    fd.dt = cfg->parsed.dt;
    fd.direction = cfg->parsed.direction[0];
    const auto profile = btsim::make_profile(cfg->parsed.sequence);
    std::vector<double> g = cfg->parsed.g_values;
    if (g.empty()) {
      for (double b : cfg->parsed.b_values) g.push_back(btsim::g_from_b(profile, b));
    }
    auto res = std::make_unique<btsim_result>();
    const auto s0 = btsim::fd_signal(fd, profile, 0.0);
    for (double gi : g) {
      btsim::SignalRecord rec;
      rec.g = gi;
      rec.b = btsim::b_from_g(profile, gi);
      rec.direction = btsim::Vec3(fd.direction, 0.0, 0.0);
      rec.signal = gi == 0.0 ? s0 : btsim::fd_signal(fd, profile, gi);
      rec.attenuation = std::abs(s0) > 0 ? std::abs(rec.signal) / std::abs(s0) : 0.0;
      res->records.push_back(rec);
    }
    *out = res.release();
  });
}

btsim_status btsim_mesh_convert(const char* input_path, const char* output_path) {
  return guarded([&] {
    require(input_path, "input path");
    require(output_path, "output path");
    const std::string in = input_path;
    const std::string text = btsim::read_text_file(in);
    std::string native;
    if (in.size() >= 4 && in.compare(in.size() - 4, 4, ".msh") == 0) {
      auto imported = btsim::to_mesh(btsim::parse_msh(text));
      native = btsim::write_native(imported.mesh, &imported.marker);
    } else {
      auto m = btsim::read_native(text);
      native = btsim::write_native(m.mesh, m.marker.empty() ? nullptr : &m.marker);
    }
    btsim::write_text_file(output_path, native);
  });
}

}  // extern "C"
