#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace btsim {

using Vec3 = Eigen::Vector3d;

// Per-cell geometry of P1 simplices. Gradients are expressed in embedding
// coordinates; for manifold cells they are tangential.
struct CellGeometry {
  std::vector<double> measure;
  std::vector<double> diameter;  // longest edge
  std::vector<Vec3> centroid;
  std::vector<Vec3> gradients;   // (topo_dim + 1) entries per cell
};

// Normals are unit length and point out of the first incident cell.
struct FacetGeometry {
  std::vector<double> measure;
  std::vector<Vec3> normal;
  std::vector<Vec3> centroid;
};

/// Simplicial mesh with topological dimension <= embedding dimension.
///
/// Vertices are stored as 3-vectors; coordinates past `embed_dim` are zero.
/// Facets are built at construction time together with the geometry tables,
/// so a constructed Mesh is always valid and immutable. Facets of manifold
/// meshes (topo_dim < embed_dim) may be shared by more than two cells at
/// branch points ("junctions"); volume meshes reject that.
class Mesh {
 public:
  Mesh(int embed_dim, int topo_dim, std::vector<Vec3> vertices,
       std::vector<int> cell_vertices);

  int embed_dim() const { return embed_dim_; }
  int topo_dim() const { return topo_dim_; }
  int vertices_per_cell() const { return topo_dim_ + 1; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_facets() const { return facet_offsets_.size() - 1; }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(std::size_t v) const { return vertices_[v]; }
  const std::vector<int>& cell_vertex_array() const { return cell_vertices_; }
  std::span<const int> cell(std::size_t c) const {
    return {cell_vertices_.data() + c * vertices_per_cell(),
            static_cast<std::size_t>(vertices_per_cell())};
  }

  // Sorted vertex ids of a facet (topo_dim entries).
  std::span<const int> facet_vertices(std::size_t f) const {
    return {facet_vertices_.data() + f * topo_dim_,
            static_cast<std::size_t>(topo_dim_)};
  }
  // Incident cells of a facet, in ascending cell order.
  std::span<const int> facet_cells(std::size_t f) const {
    return {facet_cells_.data() + facet_offsets_[f],
            static_cast<std::size_t>(facet_offsets_[f + 1] - facet_offsets_[f])};
  }
  bool is_boundary_facet(std::size_t f) const { return facet_cells(f).size() == 1; }
  bool is_interior_facet(std::size_t f) const { return facet_cells(f).size() == 2; }

  // Facet opposite local vertex j of cell c.
  int cell_facet(std::size_t c, int j) const {
    return cell_facets_[c * vertices_per_cell() + j];
  }

  const CellGeometry& cells() const { return cell_geometry_; }
  const FacetGeometry& facets() const { return facet_geometry_; }

  std::span<const Vec3> cell_gradients(std::size_t c) const {
    return {cell_geometry_.gradients.data() + c * vertices_per_cell(),
            static_cast<std::size_t>(vertices_per_cell())};
  }

  // Axis-aligned bounding box of the vertex cloud.
  Vec3 lower_corner() const;
  Vec3 upper_corner() const;

  double total_measure() const;

 private:
  void build_facets();
  void build_geometry();

  int embed_dim_;
  int topo_dim_;
  std::size_t num_cells_ = 0;
  std::vector<Vec3> vertices_;
  std::vector<int> cell_vertices_;
  std::vector<int> cell_facets_;
  std::vector<int> facet_vertices_;
  std::vector<int> facet_offsets_;
  std::vector<int> facet_cells_;
  CellGeometry cell_geometry_;
  FacetGeometry facet_geometry_;
};

using CompartmentMarker = std::vector<int>;
using PhaseFunction = std::vector<std::uint8_t>;

/// Interval / rectangle / box mesh with n[k] subdivisions per axis.
/// Rectangles are cut into 2 triangles and cubes into 6 Kuhn tetrahedra,
/// all with the same diagonal so opposite faces are translational copies.
Mesh build_structured_mesh(std::span<const double> p0, std::span<const double> p1,
                           std::span<const int> n);

/// Concentric layered disk centred at the origin. Layer l spans
/// [radii[l-1], radii[l]] with radial_cells[l] rings of cells; every ring has
/// `segments` cells around. Markers are the layer index.
struct LayeredDisk {
  Mesh mesh;
  CompartmentMarker marker;
};
LayeredDisk build_layered_disk(std::span<const double> radii,
                               std::span<const int> radial_cells, int segments);

/// Binary tree of straight 1D branches embedded in 3D (2^levels - 1
/// branches); child branches are 0.8 times their parent's length.
Mesh build_branched_tree(int levels, double root_length, int cells_per_branch);

PhaseFunction phase_from_marker(std::span<const int> marker);

struct InterfaceFacetSet {
  std::vector<int> facets;
  std::vector<Vec3> normals;     // from the phase-0 cell into the phase-1 cell
  std::vector<int> phase0_cell;
  std::vector<int> phase1_cell;
};

InterfaceFacetSet interface_facets(const Mesh& mesh, std::span<const std::uint8_t> phase);

/// Translational pairing of the boundary facets on the two box faces normal
/// to `axis`. The face at the lower coordinate is the master.
struct FacetPairing {
  int axis = 0;
  double shift = 0.0;                       // b_k - a_k
  std::vector<std::pair<int, int>> facets;  // (master facet, slave facet)
  std::vector<std::pair<int, int>> vertices;  // (master vertex, slave vertex)

  /// Same pairing seen from the slave side (shift negated).
  FacetPairing reversed() const;
};

/// `tol` is relative to the box extent along `axis`.
FacetPairing find_periodic_pairs(const Mesh& mesh, int axis, double tol = 1e-9);

/// Restrict a mesh to the cells where keep[c] is true. Vertices are renumbered
/// densely in their original order.
Mesh submesh(const Mesh& mesh, std::span<const bool> keep);

}  // namespace btsim
