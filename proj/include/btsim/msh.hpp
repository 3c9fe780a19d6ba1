#pragma once

#include "btsim/mesh.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace btsim {

// Gmsh MSH 2.2 ASCII document. Only element types 1 (line), 2 (triangle),
// 4 (tetrahedron) and 15 (point) are accepted.
struct MshElement {
  long id = 0;
  int type = 0;
  std::vector<long> tags;    // first tag is the physical group
  std::vector<int> nodes;    // dense node indices
};

struct MshDocument {
  std::string version;
  std::vector<Vec3> nodes;
  std::map<long, int> node_index;   // file node id -> dense index
  std::vector<MshElement> elements;
  std::vector<std::string> warnings;
};

MshDocument parse_msh(std::string_view text);

struct MeshImport {
  Mesh mesh;
  CompartmentMarker marker;
  std::map<int, int> facet_tags;  // facet id -> physical tag
};

MeshImport to_mesh(const MshDocument& doc);

/// Native line-oriented format:
///   btmesh 1 <embed_dim> <topo_dim> <n_vertices> <n_cells>
///   <vertex coordinates>...   (shortest round-trip decimal)
///   <cell vertex indices>...
///   [markers
///    <one integer per cell>...]
std::string write_native(const Mesh& mesh, const CompartmentMarker* marker = nullptr);

struct NativeMesh {
  Mesh mesh;
  CompartmentMarker marker;  // empty when the file has no markers section
};

NativeMesh read_native(std::string_view text);

std::string read_text_file(const std::string& path);

}  // namespace btsim
