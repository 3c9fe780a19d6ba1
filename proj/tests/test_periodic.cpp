#include "btsim/error.hpp"
#include "btsim/periodic.hpp"

#include <doctest.h>

#include <random>

using namespace btsim;

namespace {

using Dense = Eigen::MatrixXcd;

Mesh box(std::vector<double> p0, std::vector<double> p1, std::vector<int> n) {
  return build_structured_mesh(p0, p1, n);
}

double max_abs(const Dense& a) { return a.cwiseAbs().maxCoeff(); }

std::vector<int> all_axes(const Mesh& m) {
  std::vector<int> axes;
  for (int k = 0; k < m.embed_dim(); ++k) axes.push_back(k);
  return axes;
}

// Square whose right face has its interior vertices slid along the face, so
// the two x-faces no longer match vertex for vertex.
Mesh non_matching_square(int n) {
  auto m = box({0, 0}, {1, 1}, {n, n});
  auto v = m.vertices();
  for (auto& x : v) {
    if (std::abs(x.x() - 1.0) < 1e-12 && x.y() > 1e-12 && x.y() < 1 - 1e-12) x.y() += 0.3 / n;
  }
  return Mesh(2, 2, v, m.cell_vertex_array());
}

}  // namespace

TEST_CASE("single cube collapses to one dof") {
  auto m = box({0, 0, 0}, {1, 1, 1}, {1, 1, 1});
  auto layout = DofLayout::single(m);
  auto pc = PeriodicConstraint::build(m, layout, all_axes(m));
  CHECK(pc.num_full() == 8);
  CHECK(pc.num_reduced() == 1);
}

TEST_CASE("torus dof counts and representative maps") {
  auto m = box({0, 0, 0}, {2, 3, 1}, {2, 3, 2});
  auto layout = DofLayout::single(m);
  auto pc = PeriodicConstraint::build(m, layout, all_axes(m));
  CHECK(pc.num_reduced() == 2 * 3 * 2);
  for (int d = 0; d < pc.num_full(); ++d) {
    const int r = pc.representative(d);
    CHECK(pc.representative(r) == r);  // idempotent
    Vec3 diff = m.vertex(d) - m.vertex(r);
    // Representatives differ by whole periods and sit on the lower faces.
    CHECK(std::abs(diff.x() / 2.0 - std::round(diff.x() / 2.0)) < 1e-12);
    CHECK(std::abs(diff.y() / 3.0 - std::round(diff.y() / 3.0)) < 1e-12);
    CHECK(std::abs(diff.z() - std::round(diff.z())) < 1e-12);
    CHECK(m.vertex(r).x() < 2.0 - 1e-12);
    CHECK(m.vertex(r).y() < 3.0 - 1e-12);
    CHECK(m.vertex(r).z() < 1.0 - 1e-12);
  }
  ComplexVector red = ComplexVector::LinSpaced(pc.num_reduced(), 1.0, 2.0);
  ComplexVector full = pc.prolong(red);
  CHECK((pc.restrict_values(full) - red).norm() == 0.0);
  CHECK((pc.prolong(pc.restrict_values(full)) - full).norm() == 0.0);
}

TEST_CASE("reduction of matrices") {
  auto m = box({0, 0}, {1, 2}, {3, 4});
  auto layout = DofLayout::single(m);
  auto pc = PeriodicConstraint::build(m, layout, all_axes(m));
  const int n = pc.num_full();
  // PᵀIP counts how many full dofs share each representative.
  SparseComplexMatrix id(n, n);
  id.setIdentity();
  Dense ri = Dense(pc.reduce(id));
  Dense mult = Dense::Zero(pc.num_reduced(), pc.num_reduced());
  for (int d = 0; d < n; ++d) mult(pc.reduced_index(d), pc.reduced_index(d)) += 1.0;
  CHECK(max_abs(ri - mult) == 0.0);
  Dense p = Dense(pc.prolongation());
  CHECK(max_abs(Dense(pc.reduce(id)) - p.transpose() * p) == 0.0);

  auto mass = assemble_mass(m, layout);
  std::vector<Mat3> d(m.num_cells(), 2e-3 * Mat3::Identity());
  auto s = assemble_stiffness(m, d, layout);
  Dense rm = Dense(pc.reduce(mass)), rs = Dense(pc.reduce(s));
  CHECK(max_abs(rm - rm.transpose()) == 0.0);
  CHECK(max_abs(rs - rs.transpose()) < 1e-17);
  CHECK(std::abs(rm.sum() - 2.0) < 1e-12);
  ComplexVector ones = ComplexVector::Ones(pc.num_reduced());
  CHECK((rs * ones).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(max_abs(rm - p.transpose() * Dense(mass) * p) < 1e-15);
  ComplexVector b = ComplexVector::LinSpaced(n, -1.0, 1.0);
  CHECK((pc.reduce_vector(b) - p.transpose() * b).norm() < 1e-14);
}

TEST_CASE("perturbed face fails the strong constraint") {
  auto m = non_matching_square(4);
  auto layout = DofLayout::single(m);
  CHECK_THROWS_AS(PeriodicConstraint::build(m, layout, std::vector<int>{0}), Error);
  CHECK_NOTHROW(PeriodicConstraint::build(m, layout, std::vector<int>{1}));
}

TEST_CASE("artificial permeability") {
  auto m = box({0}, {5}, {10});
  std::vector<Mat3> d(m.num_cells(), 3e-3 * Mat3::Identity());
  CHECK(compute_kappa_e(m, d) == doctest::Approx(6e-3).epsilon(1e-14));
  auto fine = box({0}, {5}, {20});
  std::vector<Mat3> df(fine.num_cells(), 3e-3 * Mat3::Identity());
  CHECK(compute_kappa_e(fine, df) == doctest::Approx(1.2e-2).epsilon(1e-14));

  // Anisotropic tensors use the largest eigenvalue.
  auto sq = box({0, 0}, {1, 1}, {2, 2});
  Mat3 a;
  a << 2e-3, 1e-3, 0, 1e-3, 2e-3, 0, 0, 0, 9.0;
  std::vector<Mat3> da(sq.num_cells(), a);
  CHECK(compute_kappa_e(sq, da) == doctest::Approx(3e-3 / std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("weak data on matching meshes") {
  auto m = box({0, 0, 0}, {1, 2, 1}, {2, 3, 2});
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), 3e-3 * Mat3::Identity());
  auto w = WeakPeriodicData::build(m, layout, d);
  CHECK(w.num_axes() == 3);
  CHECK(w.shift(1) == doctest::Approx(2.0));

  // The point correspondence reproduces the strong vertex pairing.
  for (int axis = 0; axis < 3; ++axis) {
    auto pairing = find_periodic_pairs(m, axis);
    for (auto [master, slave] : pairing.vertices) {
      Vec3 y = m.vertex(slave);
      y[axis] -= w.shift(axis);
      auto loc = w.locate(y, axis, true);
      auto fv = m.facet_vertices(loc.facet);
      Vec3 back = Vec3::Zero();
      for (std::size_t a = 0; a < fv.size(); ++a) back += loc.barycentric[a] * m.vertex(fv[a]);
      CHECK((back - m.vertex(master)).norm() < 1e-12);
      for (std::size_t a = 0; a < fv.size(); ++a) {
        if (fv[a] == master) CHECK(loc.barycentric[a] == doctest::Approx(1.0));
      }
    }
  }
  CHECK_THROWS_AS(w.locate(Vec3(0.5, 1.0, 0.5), 0, true), Error);

  // Antisymmetry of the phase shifts.
  const Vec3 q = Vec3(1, 2, 2) / 3.0;
  for (double big_f : {0.0, 1234.5, -987.0}) {
    for (int k = 0; k < 3; ++k) CHECK(w.theta_ms(k, q, 3e-7, big_f) + w.theta_sm(k, q, 3e-7, big_f) == 0.0);
  }

  // With g = 0 a uniform field is a fixed point: the cross traces equal the own ones.
  ComplexVector ones = ComplexVector::Ones(layout.num_dofs());
  ComplexVector cross = w.cross_terms(ones, q, 0.0, 0.0);
  ComplexVector own = w.own_mass() * ones;
  CHECK((cross - own).cwiseAbs().maxCoeff() < 1e-15);
  Dense wm = Dense(w.own_mass());
  CHECK(max_abs(wm - wm.transpose()) == 0.0);
}

TEST_CASE("weak data on non-matching faces") {
  auto m = non_matching_square(5);
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), 1e-3 * Mat3::Identity());
  auto w = WeakPeriodicData::build(m, layout, d);
  // A linear field is traced exactly across faces: X_m u = W_m (u + L a).
  const double ax = 0.7, ay = -1.3;
  ComplexVector u(layout.num_dofs());
  for (int v = 0; v < layout.num_dofs(); ++v) u[v] = 0.2 + ax * m.vertex(v).x() + ay * m.vertex(v).y();
  for (int axis = 0; axis < 2; ++axis) {
    const double slope = axis == 0 ? ax : ay;
    for (int side = 0; side < 2; ++side) {
      auto facets = w.face_facets(axis, side);
      auto wm = assemble_facet_mass(m, facets, layout);
      const double sign = side == 0 ? 1.0 : -1.0;
      ComplexVector shifted = u + ComplexVector::Constant(u.size(), sign * w.shift(axis) * slope);
      ComplexVector lhs = w.cross(axis, side) * u;
      ComplexVector rhs = wm * shifted;
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}
