#pragma once

#include "btsim/assembly.hpp"

#include <vector>

namespace btsim {

/// Strong periodic identification on a box mesh with matching opposite faces.
/// Every dof is mapped to a representative by applying the slave→master maps
/// of the periodic axes in ascending order until nothing changes; the
/// representatives are the kept (reduced) dofs.
class PeriodicConstraint {
 public:
  static PeriodicConstraint build(const Mesh& mesh, const DofLayout& layout,
                                  std::span<const int> axes, double tol = 1e-9);

  int num_full() const { return static_cast<int>(reduced_index_.size()); }
  int num_reduced() const { return num_reduced_; }
  const std::vector<FacetPairing>& pairings() const { return pairings_; }

  /// Full dof -> representative full dof.
  int representative(int dof) const { return representative_[dof]; }
  /// Full dof -> reduced index of its representative.
  int reduced_index(int dof) const { return reduced_index_[dof]; }

  /// Prolongation P (full x reduced), one unit entry per row.
  const SparseComplexMatrix& prolongation() const { return prolongation_; }

  ComplexVector prolong(const ComplexVector& reduced) const;
  /// Values at the kept dofs (left inverse of prolong on periodic vectors).
  ComplexVector restrict_values(const ComplexVector& full) const;
  /// Pᵀ b.
  ComplexVector reduce_vector(const ComplexVector& full) const;
  /// PᵀAP.
  SparseComplexMatrix reduce(const SparseComplexMatrix& a) const;

 private:
  std::vector<FacetPairing> pairings_;
  std::vector<int> representative_;
  std::vector<int> reduced_index_;
  std::vector<int> kept_;
  int num_reduced_ = 0;
  SparseComplexMatrix prolongation_;
};

/// max over boundary-adjacent cells of λmax(D) / diameter.
double compute_kappa_e(const Mesh& mesh, const std::vector<Mat3>& diffusion);

/// Where a point landed on the opposite box face.
struct FaceLocation {
  int facet = -1;
  std::array<double, 3> barycentric{};  // w.r.t. mesh.facet_vertices(facet)
};

/// Data for the weakly imposed (artificial permeability) pseudo-periodic
/// condition. Box faces at the lower coordinate are masters.
///
/// The cross-face traces are stored as sparse coupling matrices
/// X[axis][side]: row i = ∫ φ_i(x) U(x ± L e_axis) over the side's face, with
/// U evaluated on the opposite face through barycentric point location.
class WeakPeriodicData {
 public:
  static WeakPeriodicData build(const Mesh& mesh, const DofLayout& layout,
                                const std::vector<Mat3>& diffusion, double tol = 1e-9);

  double kappa_e() const { return kappa_e_; }
  int num_axes() const { return num_axes_; }
  double shift(int axis) const { return shift_[axis]; }

  /// Facet mass over every facet lying on a box face.
  const SparseComplexMatrix& own_mass() const { return own_mass_; }
  /// side 0: master face (trace taken from the slave side), side 1: slave face.
  const SparseComplexMatrix& cross(int axis, int side) const { return cross_[axis][side]; }

  /// θ_ms = γ g·(x_s − x_m) F and θ_sm = −θ_ms for direction q, amplitude g.
  double theta_ms(int axis, const Vec3& q, double g, double big_f) const;
  double theta_sm(int axis, const Vec3& q, double g, double big_f) const;

  /// Cross-face rhs contribution Σ_axis e^{iθ_ms} X_m u + e^{iθ_sm} X_s u,
  /// without the (1−θ)κᵉ factor.
  ComplexVector cross_terms(const ComplexVector& u, const Vec3& q, double g, double big_f) const;

  /// Locate a point on the master (lower) or slave (upper) face of `axis`;
  /// throws kProjection when no face facet contains it.
  FaceLocation locate(const Vec3& point, int axis, bool master) const;

  const std::vector<int>& face_facets(int axis, int side) const { return face_facets_[axis][side]; }

 private:
  struct FaceFacet {
    int id = -1;
    int num_vertices = 0;
    std::array<int, 3> vertices{};
    Vec3 lo, hi;  // bounding box
  };

  std::vector<Vec3> coords_;
  std::array<std::array<std::vector<FaceFacet>, 2>, 3> faces_;
  double kappa_e_ = 0.0;
  double tol_ = 0.0;
  int num_axes_ = 0;
  std::array<double, 3> shift_{};
  std::array<std::array<std::vector<int>, 2>, 3> face_facets_;
  std::array<std::array<SparseComplexMatrix, 2>, 3> cross_;
  SparseComplexMatrix own_mass_;
};

}  // namespace btsim
