#include "btsim/assembly.hpp"
#include "btsim/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace btsim;

namespace {

using Dense = Eigen::MatrixXcd;

Mesh box(std::vector<double> p0, std::vector<double> p1, std::vector<int> n) {
  return build_structured_mesh(p0, p1, n);
}

double max_abs(const Dense& a) { return a.cwiseAbs().maxCoeff(); }

Mat3 anisotropic() {
  Mat3 d;
  d << 3e-3, 4e-4, -2e-4, 4e-4, 2e-3, 1e-4, -2e-4, 1e-4, 1e-3;
  return d;
}

ComplexVector random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexVector v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(u(rng), u(rng));
  return v;
}

}  // namespace

TEST_CASE("unit interval element matrices") {
  auto m = box({0}, {1}, {1});
  auto layout = DofLayout::single(m);
  Dense mass = Dense(assemble_mass(m, layout));
  CHECK(std::abs(mass(0, 0) - 2.0 / 6.0) < 1e-15);
  CHECK(std::abs(mass(0, 1) - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(mass(1, 1) - 2.0 / 6.0) < 1e-15);
  std::vector<Mat3> d(1, Mat3::Identity());
  Dense s = Dense(assemble_stiffness(m, d, layout));
  CHECK(std::abs(s(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(s(0, 1) + 1.0) < 1e-15);
  CHECK(std::abs(s(1, 1) - 1.0) < 1e-15);

  // ∫ x φi φj on [0,1]: 1/12, 1/12, 1/4.
  Dense j = Dense(assemble_position_mass(m, Vec3::UnitX(), layout));
  CHECK(std::abs(j(0, 0) - 1.0 / 12.0) < 1e-15);
  CHECK(std::abs(j(0, 1) - 1.0 / 12.0) < 1e-15);
  CHECK(std::abs(j(1, 1) - 1.0 / 4.0) < 1e-15);
}

TEST_CASE("position mass on the reference triangle") {
  Mesh m(2, 2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {0, 1, 2});
  auto layout = DofLayout::single(m);
  Dense j = Dense(assemble_position_mass(m, Vec3::UnitX(), layout));
  // Monomial integrals ∫x^a y^b = a! b! / (a+b+2)! over the triangle.
  const double expect[3][3] = {{1.0 / 60, 1.0 / 60, 1.0 / 120}, {1.0 / 60, 1.0 / 20, 1.0 / 60},
                               {1.0 / 120, 1.0 / 60, 1.0 / 60}};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) CHECK(std::abs(j(a, b) - expect[a][b]) < 1e-15);
  }
}

TEST_CASE("position mass totals the first moment") {
  auto m = box({-1, 0.5, 2}, {3, 2, 3}, {3, 2, 2});
  auto layout = DofLayout::single(m);
  const Vec3 q = Vec3(1, 2, -2).normalized();
  Dense j = Dense(assemble_position_mass(m, q, layout));
  const Vec3 centre(1.0, 1.25, 2.5);
  CHECK(std::abs(j.sum() - m.total_measure() * q.dot(centre)) < 1e-12);
  CHECK(max_abs(j - j.transpose()) < 1e-15);
  CHECK(max_abs(Dense(assemble_position_mass(m, Vec3::Zero(), layout))) == 0.0);
}

TEST_CASE("mass row sums and stiffness null space") {
  for (const auto& m : {box({0}, {10}, {7}), box({0, 0}, {2, 3}, {4, 5}), box({0, 0, 0}, {1, 1, 2}, {2, 3, 2})}) {
    auto layout = DofLayout::single(m);
    auto mass = assemble_mass(m, layout);
    ComplexVector ones = ComplexVector::Ones(layout.num_dofs());
    CHECK(std::abs((mass * ones).sum() - m.total_measure()) < 1e-12 * m.total_measure());
    std::vector<Mat3> d(m.num_cells(), anisotropic());
    for (auto& t : d) {
      for (int k = m.embed_dim(); k < 3; ++k) t.row(k).setZero(), t.col(k).setZero();
    }
    auto s = assemble_stiffness(m, d, layout);
    CHECK((s * ones).cwiseAbs().maxCoeff() < 1e-15);
    Dense sd = Dense(s);
    CHECK(max_abs(sd - sd.transpose()) < 1e-18);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sd.real());
    CHECK(es.eigenvalues().minCoeff() > -1e-15);
    // Constant weight gives a scaled mass.
    std::vector<double> w(m.num_cells(), 2.5);
    Dense wm = Dense(assemble_weighted_mass(m, w, layout));
    CHECK(max_abs(wm - 2.5 * Dense(mass)) < 1e-15);
  }
}

TEST_CASE("gradient energy is qᵀDq times the mass") {
  auto m = box({0, 0, 0}, {1, 2, 1}, {2, 2, 2});
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), anisotropic());
  const Vec3 q = Vec3(1, 1, 0).normalized();
  Dense qm = Dense(assemble_gradient_energy(m, d, q, layout));
  Dense mass = Dense(assemble_mass(m, layout));
  CHECK(q.dot(anisotropic() * q) > 0.0);
  CHECK(max_abs(qm - q.dot(anisotropic() * q) * mass) < 1e-17);
}

TEST_CASE("convection integration by parts") {
  for (const auto& m : {box({0, 0}, {2, 3}, {3, 4}), box({0, 0, 0}, {1, 1, 2}, {2, 2, 3})}) {
    auto layout = DofLayout::single(m);
    std::vector<Mat3> d(m.num_cells(), anisotropic());
    for (auto& t : d) {
      for (int k = m.embed_dim(); k < 3; ++k) t.row(k).setZero(), t.col(k).setZero();
    }
    Vec3 q = m.embed_dim() == 2 ? Vec3(0.6, 0.8, 0) : Vec3(2, -1, 2) / 3.0;
    auto c = assemble_convection(m, d, q, layout);
    auto b = assemble_boundary(m, exterior_facets(m), d, q, layout);
    Dense cd = Dense(c), bd = Dense(b);
    CHECK(max_abs(cd + cd.transpose() - 2.0 * bd) < 1e-15);
    ComplexVector ones = ComplexVector::Ones(layout.num_dofs());
    CHECK((c * ones).cwiseAbs().maxCoeff() < 1e-15);
    auto u = random_vector(layout.num_dofs(), 3);
    CHECK(std::abs(ones.dot(c * u) - 2.0 * ones.dot(b * u)) < 1e-12);
  }
}

TEST_CASE("convection on an interval") {
  auto m = box({0}, {10}, {20});
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), 3e-3 * Mat3::Identity());
  auto c = assemble_convection(m, d, Vec3::UnitX(), layout);
  ComplexVector u(layout.num_dofs());
  for (int v = 0; v < layout.num_dofs(); ++v) u[v] = std::sin(m.vertex(v).x()) + 0.1 * m.vertex(v).x();
  ComplexVector ones = ComplexVector::Ones(layout.num_dofs());
  const double expect = 2.0 * 3e-3 * (u[20] - u[0]).real();
  CHECK(std::abs(ones.dot(c * u) - expect) < 1e-15);
  // Gradient orthogonal to the only derivative direction.
  CHECK(max_abs(Dense(assemble_convection(m, d, Vec3::UnitY(), layout))) == 0.0);
}

TEST_CASE("manifold stiffness equals the scaled flat stiffness") {
  const Vec3 t = Vec3(1, 2, 2) / 3.0;
  std::vector<Vec3> pts;
  std::vector<int> cells;
  const int n = 6;
  for (int k = 0; k <= n; ++k) pts.push_back(t * (1.5 * k));
  for (int k = 0; k < n; ++k) cells.insert(cells.end(), {k, k + 1});
  Mesh line(3, 1, pts, cells);
  auto flat = box({0}, {1.5 * n}, {n});
  std::vector<Mat3> d3(line.num_cells(), anisotropic());
  std::vector<Mat3> d1(flat.num_cells(), Mat3::Identity());
  Dense s3 = Dense(assemble_stiffness(line, d3, DofLayout::single(line)));
  Dense s1 = Dense(assemble_stiffness(flat, d1, DofLayout::single(flat)));
  CHECK(max_abs(s3 - t.dot(anisotropic() * t) * s1) < 1e-17);
  CHECK(line.total_measure() == doctest::Approx(1.5 * n));
  Dense m3 = Dense(assemble_mass(line, DofLayout::single(line)));
  Dense m1 = Dense(assemble_mass(flat, DofLayout::single(flat)));
  CHECK(max_abs(m3 - m1) < 1e-14);
}

TEST_CASE("pufem layout and interface operators") {
  auto m = box({0}, {2}, {2});
  PhaseFunction ph{0, 1};
  auto layout = DofLayout::pufem(m, ph);
  CHECK(layout.num_dofs() == 4);
  CHECK(layout.dof(0, 0) == 0);
  CHECK(layout.dof(0, 1) == 1);
  CHECK(layout.dof(0, 2) == -1);
  CHECK(layout.dof(1, 0) == -1);
  CHECK(layout.dof(1, 1) == 2);
  CHECK(layout.dof(1, 2) == 3);
  CHECK(layout.dof_field(1) == 0);
  CHECK(layout.dof_field(2) == 1);

  auto gamma = interface_facets(m, ph);
  Dense i = Dense(assemble_interface(m, gamma, 1.0, layout));
  // Point facet of unit mass couples the two copies of vertex 1.
  Dense expect = Dense::Zero(4, 4);
  expect(1, 1) = expect(2, 2) = 1.0;
  expect(1, 2) = expect(2, 1) = -1.0;
  CHECK(max_abs(i - expect) == 0.0);
  CHECK(max_abs(Dense(assemble_interface(m, gamma, 0.0, layout))) == 0.0);
}

TEST_CASE("pufem blocks on a layered disk") {
  std::vector<double> radii{5, 7.5, 10};
  std::vector<int> rings{2, 2, 1};
  auto disk = build_layered_disk(radii, rings, 24);
  auto ph = phase_from_marker(disk.marker);
  auto layout = DofLayout::pufem(disk.mesh, ph);
  auto coeffs = CellCoefficients::uniform(disk.mesh.num_cells(), 2e-3);
  for (std::size_t c = 0; c < disk.mesh.num_cells(); ++c) {
    if (ph[c]) coeffs.diffusion[c] = anisotropic(), coeffs.diffusion[c].row(2).setZero(), coeffs.diffusion[c].col(2).setZero();
  }
  const Vec3 q = Vec3(0.8, -0.6, 0);
  SystemSpec spec;
  spec.formulation = Formulation::kTransformed;
  spec.direction = q;
  spec.kappa = 1e-5;
  auto sys = assemble_system(disk.mesh, ph, layout, coeffs, spec);

  // Volume operators never couple the fields.
  for (const auto* a : {&sys.M, &sys.S, &sys.R, &sys.C, &sys.Q, &sys.B}) {
    for (int r = 0; r < a->outerSize(); ++r) {
      for (SparseComplexMatrix::InnerIterator it(*a, r); it; ++it) {
        CHECK(layout.dof_field(static_cast<int>(it.row())) == layout.dof_field(static_cast<int>(it.col())));
      }
    }
  }
  // Equal fields have no jump. Test-side factorisation I = κ JᵀWJ with the
  // jump operator J (u₀ − u₁ at interface vertices) and the facet mass W:
  // J u vanishes exactly, so I u is exactly zero in that evaluation order.
  ComplexVector u(layout.num_dofs());
  auto base = random_vector(static_cast<int>(disk.mesh.num_vertices()), 11);
  for (int d = 0; d < layout.num_dofs(); ++d) u[d] = base[layout.dof_vertex(d)];
  auto gamma = interface_facets(disk.mesh, ph);
  std::vector<int> gamma_vertices;
  for (int f : gamma.facets) {
    for (int v : disk.mesh.facet_vertices(f)) gamma_vertices.push_back(v);
  }
  std::sort(gamma_vertices.begin(), gamma_vertices.end());
  gamma_vertices.erase(std::unique(gamma_vertices.begin(), gamma_vertices.end()), gamma_vertices.end());
  const int ng = static_cast<int>(gamma_vertices.size());
  auto local = [&](int v) {
    return static_cast<int>(std::lower_bound(gamma_vertices.begin(), gamma_vertices.end(), v) - gamma_vertices.begin());
  };
  Dense jump = Dense::Zero(ng, layout.num_dofs());
  for (int k = 0; k < ng; ++k) {
    jump(k, layout.dof(0, gamma_vertices[k])) = 1.0;
    jump(k, layout.dof(1, gamma_vertices[k])) = -1.0;
  }
  Dense w = Dense::Zero(ng, ng);
  for (int f : gamma.facets) {
    auto fv = disk.mesh.facet_vertices(f);
    const double len = disk.mesh.facets().measure[f];
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) w(local(fv[a]), local(fv[b])) += len * (a == b ? 2.0 : 1.0) / 6.0;
    }
  }
  Dense id = Dense(sys.I);
  CHECK(max_abs(id - 1e-5 * jump.transpose() * w * jump) < 1e-15 * max_abs(id));
  ComplexVector ju = jump * u;
  CHECK(ju.cwiseAbs().maxCoeff() == 0.0);
  ComplexVector factored = 1e-5 * jump.transpose() * (w * ju);
  CHECK(factored.cwiseAbs().maxCoeff() == 0.0);
  ComplexVector iu = sys.I * u;
  CHECK(iu.cwiseAbs().maxCoeff() <= 1e-15 * max_abs(id) * u.cwiseAbs().maxCoeff());
  // I is symmetric positive semidefinite.
  CHECK(max_abs(id - id.transpose()) == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(id.real());
  CHECK(es.eigenvalues().minCoeff() > -1e-15);

  // The iγF-weighted part of the transformed operator is antisymmetric.
  Dense c = Dense(sys.C), b = Dense(sys.B), k1 = Dense(sys.K1), k2 = Dense(sys.K2);
  Dense skew = c - b - 0.5 * k1 - 2.0 * k2;
  CHECK(max_abs(skew + skew.transpose()) < 1e-16);
  CHECK(max_abs(c) > 1e-4);

  // Symmetric constituents.
  for (const auto* a : {&sys.M, &sys.S, &sys.R, &sys.Q}) {
    Dense ad = Dense(*a);
    CHECK(max_abs(ad - ad.transpose()) <= 1e-14 * max_abs(ad));
  }
  // Row column indices strictly increase.
  for (int r = 0; r < sys.M.outerSize(); ++r) {
    int prev = -1;
    for (SparseComplexMatrix::InnerIterator it(sys.M, r); it; ++it) {
      CHECK(it.col() > prev);
      prev = static_cast<int>(it.col());
    }
  }
}

TEST_CASE("assembly is identical across thread counts") {
  auto m = box({0, 0, 0}, {1, 1, 1}, {5, 4, 3});
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), anisotropic());
  const Vec3 q = Vec3(1, 1, 1).normalized();
  AssemblyOptions one{1}, many{4};
  auto same = [](const SparseComplexMatrix& a, const SparseComplexMatrix& b) {
    if (a.nonZeros() != b.nonZeros()) return false;
    for (Eigen::Index k = 0; k < a.nonZeros(); ++k) {
      if (a.valuePtr()[k] != b.valuePtr()[k] || a.innerIndexPtr()[k] != b.innerIndexPtr()[k]) return false;
    }
    return true;
  };
  CHECK(same(assemble_mass(m, layout, one), assemble_mass(m, layout, many)));
  CHECK(same(assemble_stiffness(m, d, layout, one), assemble_stiffness(m, d, layout, many)));
  CHECK(same(assemble_convection(m, d, q, layout, one), assemble_convection(m, d, q, layout, many)));
  CHECK(same(assemble_position_mass(m, q, layout, one), assemble_position_mass(m, q, layout, many)));
}

TEST_CASE("invalid coefficients are rejected") {
  auto m = box({0, 0}, {1, 1}, {1, 1});
  auto layout = DofLayout::single(m);
  std::vector<Mat3> d(m.num_cells(), Mat3::Identity());
  d[1](0, 1) = 0.5;
  CHECK_THROWS_AS(assemble_stiffness(m, d, layout), Error);
  std::vector<double> t2(m.num_cells(), 0.0);
  CHECK_THROWS_AS(assemble_relaxation(m, t2, layout), Error);
  InterfaceFacetSet empty;
  try {
    assemble_interface(m, empty, 1.0, layout);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSupport);
  }
  auto coeffs = CellCoefficients::uniform(m.num_cells(), 1.0);
  PhaseFunction ph(m.num_cells(), 0);
  SystemSpec spec;
  spec.direction = Vec3(0, 0, 1);
  CHECK_THROWS_AS(assemble_system(m, ph, layout, coeffs, spec), Error);
}

TEST_CASE("matrix market dump") {
  auto m = box({0}, {1}, {1});
  auto text = to_matrix_market(assemble_mass(m, DofLayout::single(m)));
  CHECK(text.rfind("%%MatrixMarket matrix coordinate complex general\n2 2 4\n", 0) == 0);
}
