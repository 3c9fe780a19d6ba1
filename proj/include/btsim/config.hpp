#pragma once

#include "btsim/msh.hpp"
#include "btsim/stepper.hpp"

#include <optional>
#include <string>
#include <vector>

namespace btsim {

// Run configuration in internal units (µm, µs, T). External units are
// converted when the JSON document is read.

struct MeshSource {
  enum class Kind { kBox, kLayeredDisk, kBranchedTree, kMsh, kNative };
  Kind kind = Kind::kBox;
  // box
  std::vector<double> p0, p1;
  std::vector<int> n;
  int split_axis = 0;
  std::vector<double> split_at;  // marker = number of split positions below the cell centroid
  // layered disk
  std::vector<double> radii;
  std::vector<int> radial_cells;
  int segments = 0;
  // branched tree
  int levels = 0;
  double root_length = 0.0;
  int cells_per_branch = 0;
  // files
  std::string path;
};

struct Compartment {
  int marker = 0;
  Mat3 diffusion = Mat3::Zero();  // µm²/µs
  double t2 = 1e16;               // µs
  double initial = 1.0;
};

struct SequenceSpec {
  std::string type = "pgse";
  double delta = 0.0;      // µs
  double big_delta = 0.0;  // µs
  int periods = 1;
  double ramp = 0.0;  // µs
};

struct RunConfig {
  MeshSource mesh;
  std::vector<Compartment> compartments;
  double kappa = 0.0;  // µm/µs
  SequenceSpec sequence;
  Vec3 direction = Vec3::UnitX();
  std::vector<double> b_values;  // s/mm²; exclusive with g_values
  std::vector<double> g_values;  // T/µm
  double dt = 200.0;
  double theta = 0.5;
  BoundaryMode boundary = BoundaryMode::kNeumann;
  std::optional<Formulation> formulation;  // default follows the boundary mode
  SolverOptions solver;
  int threads = 1;
  std::optional<int> multi_compartment;  // cross-check flag only
  std::string csv_path, svg_path;
  bool log_scale = false;
};

/// Strict parse: unknown keys, wrong types and unit-less ambiguous fields are
/// configuration errors. `base_dir` resolves relative mesh paths.
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = "");

/// RFC 7386 merge patch applied to the JSON text before parsing.
std::string merge_config_patch(const std::string& json_text, const std::string& patch_text);

TemporalProfile make_profile(const SequenceSpec& spec);

struct LoadedMesh {
  Mesh mesh;
  CompartmentMarker marker;
};
LoadedMesh load_mesh(const MeshSource& src);

/// Full pipeline: mesh, assembly, time stepping, signal records.
std::vector<SignalRecord> run_config(const RunConfig& cfg);

std::string format_csv(const std::vector<SignalRecord>& records);
std::string format_svg(const std::vector<SignalRecord>& records, bool log_scale);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace btsim
