/* C interface to the Bloch-Torrey simulator.
 *
 * Every function returns a btsim_status; on failure the message is available
 * from btsim_last_error() (thread-local, valid until the next call on the
 * same thread). Handles are opaque and owned by the caller.
 */
#ifndef BTSIM_BTSIM_H
#define BTSIM_BTSIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(BTSIM_BUILDING_LIBRARY)
#define BTSIM_API __attribute__((visibility("default")))
#else
#define BTSIM_API
#endif

typedef enum btsim_status {
  BTSIM_OK = 0,
  BTSIM_ERROR_INTERNAL = 1,
  BTSIM_ERROR_CONFIG = 2,  /* configuration / invalid argument */
  BTSIM_ERROR_MESH = 3,    /* mesh construction or parsing */
  BTSIM_ERROR_SOLVER = 4,  /* linear solver failure or instability */
  BTSIM_ERROR_IO = 5
} btsim_status;

typedef struct btsim_config btsim_config;
typedef struct btsim_result btsim_result;

typedef struct btsim_signal_record {
  double b_s_per_mm2;
  double g_T_per_um;
  double direction[3];
  double s_re;
  double s_im;
  double attenuation;
} btsim_signal_record;

BTSIM_API const char* btsim_version(void);
BTSIM_API const char* btsim_last_error(void);

/* Relative mesh paths in a config file resolve against the file's directory. */
BTSIM_API btsim_status btsim_config_load_file(const char* path, btsim_config** out);
BTSIM_API btsim_status btsim_config_load_string(const char* json, btsim_config** out);
/* JSON merge patch applied on top of the loaded document. */
BTSIM_API btsim_status btsim_config_merge_patch(btsim_config* cfg, const char* patch_json);
BTSIM_API void btsim_config_free(btsim_config* cfg);

BTSIM_API btsim_status btsim_run(const btsim_config* cfg, btsim_result** out);
BTSIM_API size_t btsim_result_size(const btsim_result* res);
BTSIM_API btsim_status btsim_result_get(const btsim_result* res, size_t index, btsim_signal_record* out);
BTSIM_API btsim_status btsim_result_write_csv(const btsim_result* res, const char* path);
BTSIM_API btsim_status btsim_result_write_svg(const btsim_result* res, const char* path, int log_scale);
/* Writes the CSV/SVG paths named in the config's output section, if any. */
BTSIM_API btsim_status btsim_result_write_outputs(const btsim_result* res, const btsim_config* cfg);
BTSIM_API void btsim_result_free(btsim_result* res);

/* Finite-difference interval reference. Regions are laid end to end from 0;
 * kappa has n_regions - 1 entries (m/s); d in mm²/s; t2 in µs (<= 0: none).
 * Uses the config's sequence, first gradient direction component and b/g list. */
BTSIM_API btsim_status btsim_oracle_run(const btsim_config* cfg, size_t n_regions, const double* lengths_um,
                                        const double* d_mm2_per_s, const double* t2_us,
                                        const double* kappa_m_per_s, int grid_cells, btsim_result** out);

/* Converts MSH 2.2 (.msh) or native text meshes to the native format. */
BTSIM_API btsim_status btsim_mesh_convert(const char* input_path, const char* output_path);

#ifdef __cplusplus
}
#endif

#endif
