#pragma once

#include "btsim/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <complex>
#include <vector>

namespace btsim {

using Complex = std::complex<double>;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor, int>;
using ComplexVector = Eigen::VectorXcd;
using Mat3 = Eigen::Matrix3d;

enum class LayoutMode { kSingle, kPufem };

/// Degree-of-freedom layout for one P1 field (single) or the two PUFEM fields.
/// In PUFEM mode field k lives only on vertices touching a phase-k cell;
/// field-0 dofs are numbered before field-1 dofs.
class DofLayout {
 public:
  static DofLayout single(const Mesh& mesh);
  static DofLayout pufem(const Mesh& mesh, std::span<const std::uint8_t> phase);

  LayoutMode mode() const { return mode_; }
  int num_fields() const { return mode_ == LayoutMode::kSingle ? 1 : 2; }
  int num_dofs() const { return num_dofs_; }
  std::size_t num_vertices() const { return vertex_dof_[0].size(); }
  std::size_t num_cells() const { return cell_field_.size(); }

  /// -1 when the vertex carries no dof in that field.
  int dof(int field, int vertex) const { return vertex_dof_[field][vertex]; }
  int cell_field(std::size_t c) const { return cell_field_[c]; }
  int dof_field(int dof) const { return dof < field_offset_[1] ? 0 : 1; }
  int dof_vertex(int dof) const { return dof_vertex_[dof]; }

 private:
  LayoutMode mode_ = LayoutMode::kSingle;
  std::array<std::vector<int>, 2> vertex_dof_;
  std::vector<int> dof_vertex_;
  std::vector<std::uint8_t> cell_field_;
  std::array<int, 2> field_offset_{0, 0};
  int num_dofs_ = 0;
};

/// Cell-wise material data. Scalar D is promoted to D·Id by the caller.
struct CellCoefficients {
  std::vector<Mat3> diffusion;  // µm²/µs
  std::vector<double> t2;       // µs

  static CellCoefficients uniform(std::size_t num_cells, double d, double t2 = 1e16);
};

struct AssemblyOptions {
  int threads = 1;
};

// Every operator below integrates exactly for P1 data. The gradient-dependent
// operators are built for the unit direction q; amplitude and the waveform
// scalars are applied at step time.

SparseComplexMatrix assemble_mass(const Mesh& mesh, const DofLayout& layout,
                                  const AssemblyOptions& opts = {});
SparseComplexMatrix assemble_stiffness(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                       const DofLayout& layout, const AssemblyOptions& opts = {});
/// Mass weighted by a per-cell constant.
SparseComplexMatrix assemble_weighted_mass(const Mesh& mesh, std::span<const double> cell_weight,
                                           const DofLayout& layout, const AssemblyOptions& opts = {});
/// Mass weighted by the affine function q·x.
SparseComplexMatrix assemble_position_mass(const Mesh& mesh, const Vec3& q,
                                           const DofLayout& layout, const AssemblyOptions& opts = {});
/// Mass weighted by 1/T2.
SparseComplexMatrix assemble_relaxation(const Mesh& mesh, std::span<const double> t2,
                                        const DofLayout& layout, const AssemblyOptions& opts = {});
/// Mass weighted by qᵀDq.
SparseComplexMatrix assemble_gradient_energy(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                             const Vec3& q, const DofLayout& layout,
                                             const AssemblyOptions& opts = {});

/// κ⟨[[u]],[[v]]⟩ over the interface, [[a]] = a₀ - a₁.
SparseComplexMatrix assemble_interface(const Mesh& mesh, const InterfaceFacetSet& gamma,
                                       double kappa, const DofLayout& layout);

struct InterfaceStrongTerms {
  SparseComplexMatrix jump;     // ⟨[[u Dq·n]], [[v]]⟩
  SparseComplexMatrix average;  // ⟨{u Dq·n}, {v}⟩
};
/// Interface terms of the transformed equation. Each side's flux weight uses
/// its own outward normal: Dq·n⁰ on the phase-0 side, Dq·n¹ = -Dq·n⁰ on the
/// phase-1 side.
InterfaceStrongTerms assemble_interface_strong(const Mesh& mesh, const InterfaceFacetSet& gamma,
                                               const std::vector<Mat3>& diffusion, const Vec3& q,
                                               const DofLayout& layout);

/// (q·D∇u + ∇u·Dq, v) = 2(q·D∇u, v) for symmetric D.
SparseComplexMatrix assemble_convection(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                        const Vec3& q, const DofLayout& layout,
                                        const AssemblyOptions& opts = {});

/// ⟨(Dq·n) u, v⟩ over the listed exterior facets.
SparseComplexMatrix assemble_boundary(const Mesh& mesh, std::span<const int> facets,
                                      const std::vector<Mat3>& diffusion, const Vec3& q,
                                      const DofLayout& layout);

/// Facet P1 mass over the listed facets, placed in the field of each facet's cell.
SparseComplexMatrix assemble_facet_mass(const Mesh& mesh, std::span<const int> facets,
                                        const DofLayout& layout);

std::vector<int> exterior_facets(const Mesh& mesh);

enum class Formulation { kDirect, kTransformed };

/// The time-independent constituents for one gradient direction. Operators
/// a formulation does not use are left empty (0x0).
struct FemSystem {
  DofLayout layout;
  Vec3 direction = Vec3::UnitX();
  Formulation formulation = Formulation::kDirect;
  SparseComplexMatrix M, S, R, I;
  SparseComplexMatrix J;           // direct only
  SparseComplexMatrix C, Q, K1, K2, B;  // transformed only (B empty on periodic boxes)
};

struct SystemSpec {
  Formulation formulation = Formulation::kDirect;
  Vec3 direction = Vec3::UnitX();
  double kappa = 0.0;                  // µm/µs
  bool neumann_boundary_terms = true;  // transformed only: include B
};

FemSystem assemble_system(const Mesh& mesh, std::span<const std::uint8_t> phase,
                          const DofLayout& layout, const CellCoefficients& coeffs,
                          const SystemSpec& spec, const AssemblyOptions& opts = {});

/// Matrix Market coordinate dump (complex general).
std::string to_matrix_market(const SparseComplexMatrix& a);

}  // namespace btsim
