#include "btsim/periodic.hpp"

#include "btsim/error.hpp"
#include "btsim/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace btsim {

PeriodicConstraint PeriodicConstraint::build(const Mesh& mesh, const DofLayout& layout,
                                             std::span<const int> axes, double tol) {
  if (layout.num_vertices() != mesh.num_vertices()) {
    fail(ErrorKind::kDimension, "dof layout does not match the mesh");
  }
  PeriodicConstraint pc;
  const int n = layout.num_dofs();
  std::vector<std::vector<int>> slave_to_master;
  std::vector<int> sorted_axes(axes.begin(), axes.end());
  std::sort(sorted_axes.begin(), sorted_axes.end());
  for (int axis : sorted_axes) {
    pc.pairings_.push_back(find_periodic_pairs(mesh, axis, tol));
    std::vector<int> map(n, -1);
    for (auto [mv, sv] : pc.pairings_.back().vertices) {
      for (int f = 0; f < layout.num_fields(); ++f) {
        const int ds = layout.dof(f, sv);
        if (ds < 0) continue;
        const int dm = layout.dof(f, mv);
        if (dm < 0) {
          fail(ErrorKind::kConstraint, "periodic vertex " + std::to_string(sv) +
                                           " has no partner dof in field " + std::to_string(f));
        }
        map[ds] = dm;
      }
    }
    slave_to_master.push_back(std::move(map));
  }

  pc.representative_.resize(n);
  for (int d = 0; d < n; ++d) {
    int r = d;
    for (int guard = 0;; ++guard) {
      if (guard > 8) fail(ErrorKind::kConstraint, "periodic maps do not reach a fixed point");
      bool changed = false;
      for (const auto& map : slave_to_master) {
        if (map[r] >= 0) {
          r = map[r];
          changed = true;
        }
      }
      if (!changed) break;
    }
    pc.representative_[d] = r;
  }
  std::vector<int> index(n, -1);
  for (int d = 0; d < n; ++d) {
    if (pc.representative_[d] == d) {
      index[d] = pc.num_reduced_++;
      pc.kept_.push_back(d);
    }
  }
  pc.reduced_index_.resize(n);
  std::vector<Eigen::Triplet<Complex>> trip;
  for (int d = 0; d < n; ++d) {
    pc.reduced_index_[d] = index[pc.representative_[d]];
    trip.emplace_back(d, pc.reduced_index_[d], 1.0);
  }
  pc.prolongation_.resize(n, pc.num_reduced_);
  pc.prolongation_.setFromTriplets(trip.begin(), trip.end());
  return pc;
}

ComplexVector PeriodicConstraint::prolong(const ComplexVector& reduced) const {
  if (reduced.size() != num_reduced_) fail(ErrorKind::kDimension, "reduced vector has wrong size");
  ComplexVector full(num_full());
  for (int d = 0; d < num_full(); ++d) full[d] = reduced[reduced_index_[d]];
  return full;
}

ComplexVector PeriodicConstraint::restrict_values(const ComplexVector& full) const {
  if (full.size() != num_full()) fail(ErrorKind::kDimension, "full vector has wrong size");
  ComplexVector out(num_reduced_);
  for (int i = 0; i < num_reduced_; ++i) out[i] = full[kept_[i]];
  return out;
}

ComplexVector PeriodicConstraint::reduce_vector(const ComplexVector& full) const {
  if (full.size() != num_full()) fail(ErrorKind::kDimension, "full vector has wrong size");
  ComplexVector out = ComplexVector::Zero(num_reduced_);
  for (int d = 0; d < num_full(); ++d) out[reduced_index_[d]] += full[d];
  return out;
}

SparseComplexMatrix PeriodicConstraint::reduce(const SparseComplexMatrix& a) const {
  if (a.rows() != num_full() || a.cols() != num_full()) {
    fail(ErrorKind::kDimension, "matrix size does not match the periodic constraint");
  }
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(a.nonZeros());
  for (int r = 0; r < a.outerSize(); ++r) {
    for (SparseComplexMatrix::InnerIterator it(a, r); it; ++it) {
      trip.emplace_back(reduced_index_[it.row()], reduced_index_[it.col()], it.value());
    }
  }
  SparseComplexMatrix out(num_reduced_, num_reduced_);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double compute_kappa_e(const Mesh& mesh, const std::vector<Mat3>& diffusion) {
  if (diffusion.size() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "diffusion tensors must have one entry per cell");
  }
  const int e = mesh.embed_dim();
  double kappa = 0.0;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    const int c = mesh.facet_cells(f)[0];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(diffusion[c].topLeftCorner(e, e));
    kappa = std::max(kappa, eig.eigenvalues().maxCoeff() / mesh.cells().diameter[c]);
  }
  return kappa;
}

namespace {

struct QuadPoint {
  Vec3 x;
  double weight;
  std::array<double, 3> phi;  // facet basis values
};

// Degree-2 exact rules on a facet with nv vertices (point, segment, triangle).
std::vector<QuadPoint> facet_quadrature(const Mesh& mesh, int facet) {
  auto fv = mesh.facet_vertices(facet);
  const double meas = mesh.facets().measure[facet];
  std::vector<QuadPoint> out;
  out.reserve(3);
  auto point = [&](std::array<double, 3> lam, double w) {
    Vec3 x = Vec3::Zero();
    for (std::size_t a = 0; a < fv.size(); ++a) x += lam[a] * mesh.vertex(fv[a]);
    out.push_back({x, w, lam});
  };
  switch (fv.size()) {
    case 1: point({1.0, 0.0, 0.0}, 1.0); break;
    case 2: {
      const double s = 0.5 / std::sqrt(3.0);
      point({0.5 + s, 0.5 - s, 0.0}, 0.5 * meas);
      point({0.5 - s, 0.5 + s, 0.0}, 0.5 * meas);
      break;
    }
    default:
      point({0.5, 0.5, 0.0}, meas / 3.0);
      point({0.0, 0.5, 0.5}, meas / 3.0);
      point({0.5, 0.0, 0.5}, meas / 3.0);
  }
  return out;
}

}  // namespace

WeakPeriodicData WeakPeriodicData::build(const Mesh& mesh, const DofLayout& layout,
                                         const std::vector<Mat3>& diffusion, double tol) {
  if (mesh.topo_dim() != mesh.embed_dim()) {
    fail(ErrorKind::kUnsupportedMesh, "periodic boundaries need a volume (non-manifold) mesh");
  }
  if (layout.num_vertices() != mesh.num_vertices()) {
    fail(ErrorKind::kDimension, "dof layout does not match the mesh");
  }
  WeakPeriodicData w;
  w.coords_ = mesh.vertices();
  w.num_axes_ = mesh.embed_dim();
  w.kappa_e_ = compute_kappa_e(mesh, diffusion);
  const Vec3 lo = mesh.lower_corner(), hi = mesh.upper_corner();
  w.tol_ = tol * (hi - lo).maxCoeff();

  // Classify boundary facets onto box faces.
  std::vector<int> all_face_facets;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    auto fv = mesh.facet_vertices(f);
    for (int k = 0; k < w.num_axes_; ++k) {
      for (int side = 0; side < 2; ++side) {
        const double plane = side == 0 ? lo[k] : hi[k];
        const bool on = std::all_of(fv.begin(), fv.end(), [&](int v) {
          return std::abs(mesh.vertex(v)[k] - plane) <= w.tol_;
        });
        if (!on) continue;
        FaceFacet ff;
        ff.id = static_cast<int>(f);
        ff.num_vertices = static_cast<int>(fv.size());
        ff.lo = ff.hi = mesh.vertex(fv[0]);
        for (std::size_t a = 0; a < fv.size(); ++a) {
          ff.vertices[a] = fv[a];
          ff.lo = ff.lo.cwiseMin(mesh.vertex(fv[a]));
          ff.hi = ff.hi.cwiseMax(mesh.vertex(fv[a]));
        }
        w.faces_[k][side].push_back(ff);
        w.face_facets_[k][side].push_back(static_cast<int>(f));
        all_face_facets.push_back(static_cast<int>(f));
      }
    }
  }
  for (int k = 0; k < w.num_axes_; ++k) {
    w.shift_[k] = hi[k] - lo[k];
    if (w.faces_[k][0].empty() || w.faces_[k][1].empty()) {
      fail(ErrorKind::kPairingFailure, "no box faces found along axis " + std::to_string(k));
    }
  }
  std::sort(all_face_facets.begin(), all_face_facets.end());
  all_face_facets.erase(std::unique(all_face_facets.begin(), all_face_facets.end()),
                        all_face_facets.end());
  w.own_mass_ = assemble_facet_mass(mesh, all_face_facets, layout);

  const int n = layout.num_dofs();
  for (int k = 0; k < w.num_axes_; ++k) {
    for (int side = 0; side < 2; ++side) {
      std::vector<Eigen::Triplet<Complex>> trip;
      const double offset = side == 0 ? w.shift_[k] : -w.shift_[k];
      for (const auto& ff : w.faces_[k][side]) {
        const int own_field = layout.cell_field(mesh.facet_cells(ff.id)[0]);
        for (const auto& qp : facet_quadrature(mesh, ff.id)) {
          Vec3 y = qp.x;
          y[k] += offset;
          const FaceLocation loc = w.locate(y, k, side == 1);
          const int host_field = layout.cell_field(mesh.facet_cells(loc.facet)[0]);
          auto hv = mesh.facet_vertices(loc.facet);
          for (int a = 0; a < ff.num_vertices; ++a) {
            const int row = layout.dof(own_field, ff.vertices[a]);
            for (std::size_t b = 0; b < hv.size(); ++b) {
              trip.emplace_back(row, layout.dof(host_field, hv[b]),
                                qp.weight * qp.phi[a] * loc.barycentric[b]);
            }
          }
        }
      }
      w.cross_[k][side].resize(n, n);
      w.cross_[k][side].setFromTriplets(trip.begin(), trip.end());
    }
  }
  return w;
}

FaceLocation WeakPeriodicData::locate(const Vec3& y, int axis, bool master) const {
  const auto& face = faces_[axis][master ? 0 : 1];
  const double tol = tol_;
  for (const auto& ff : face) {
    if (((y - ff.lo).array() < -tol).any() || ((y - ff.hi).array() > tol).any()) continue;
    FaceLocation loc;
    loc.facet = ff.id;
    const Vec3& a = coords_[ff.vertices[0]];
    if (ff.num_vertices == 1) {
      if ((y - a).norm() > tol) continue;
      loc.barycentric = {1.0, 0.0, 0.0};
      return loc;
    }
    if (ff.num_vertices == 2) {
      const Vec3 e = coords_[ff.vertices[1]] - a;
      const double t = (y - a).dot(e) / e.squaredNorm();
      if ((a + t * e - y).norm() > tol || t < -tol / e.norm() || t > 1 + tol / e.norm()) continue;
      loc.barycentric = {1.0 - t, t, 0.0};
      return loc;
    }
    const Vec3 e1 = coords_[ff.vertices[1]] - a;
    const Vec3 e2 = coords_[ff.vertices[2]] - a;
    Eigen::Matrix2d g;
    g << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
    const Eigen::Vector2d r(e1.dot(y - a), e2.dot(y - a));
    const Eigen::Vector2d s = g.ldlt().solve(r);
    const double scale = tol / std::sqrt(std::max(e1.squaredNorm(), e2.squaredNorm()));
    if ((a + s[0] * e1 + s[1] * e2 - y).norm() > tol) continue;
    if (s[0] < -scale || s[1] < -scale || s[0] + s[1] > 1 + scale) continue;
    loc.barycentric = {1.0 - s[0] - s[1], s[0], s[1]};
    return loc;
  }
  std::ostringstream os;
  os.precision(17);
  os << "point (" << y[0] << ", " << y[1] << ", " << y[2] << ") not found on the "
     << (master ? "master" : "slave") << " face of axis " << axis;
  fail(ErrorKind::kProjection, os.str());
}

double WeakPeriodicData::theta_ms(int axis, const Vec3& q, double g, double big_f) const {
  return kGyromagneticRatio * g * q[axis] * shift_[axis] * big_f;
}

double WeakPeriodicData::theta_sm(int axis, const Vec3& q, double g, double big_f) const {
  return -theta_ms(axis, q, g, big_f);
}

ComplexVector WeakPeriodicData::cross_terms(const ComplexVector& u, const Vec3& q, double g,
                                            double big_f) const {
  ComplexVector out = ComplexVector::Zero(u.size());
  for (int k = 0; k < num_axes_; ++k) {
    out += std::polar(1.0, theta_ms(k, q, g, big_f)) * (cross_[k][0] * u);
    out += std::polar(1.0, theta_sm(k, q, g, big_f)) * (cross_[k][1] * u);
  }
  return out;
}

}  // namespace btsim
