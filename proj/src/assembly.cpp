#include "btsim/assembly.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

namespace btsim {
namespace {

using Triplet = Eigen::Triplet<Complex>;
using TripletBuffer = std::vector<Triplet>;

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

void check_layout(const Mesh& mesh, const DofLayout& layout) {
  if (layout.num_vertices() != mesh.num_vertices() || layout.num_cells() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "dof layout does not match the mesh");
  }
}

void check_cell_data(const Mesh& mesh, std::size_t n, const char* what) {
  if (n != mesh.num_cells()) {
    fail(ErrorKind::kDimension, std::string(what) + " must have one entry per cell");
  }
}

void check_symmetric(const Mat3& d, std::size_t cell) {
  if ((d - d.transpose()).norm() > 1e-12 * std::max(d.norm(), 1e-300)) {
    fail(ErrorKind::kInvalidArgument,
         "diffusion tensor of cell " + std::to_string(cell) + " is not symmetric");
  }
}

// Cells are sharded into contiguous blocks; concatenating the per-thread
// buffers in block order reproduces the serial triplet sequence exactly.
template <class Kernel>
SparseComplexMatrix assemble_cells(std::size_t num_cells, int n, int threads, Kernel&& kernel) {
  threads = std::clamp(threads, 1, 64);
  if (static_cast<std::size_t>(threads) > num_cells) threads = 1;
  std::vector<TripletBuffer> buffers(threads);
  const std::size_t chunk = (num_cells + threads - 1) / threads;
  auto work = [&](int t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(num_cells, begin + chunk);
    for (std::size_t c = begin; c < end; ++c) kernel(c, buffers[t]);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  std::size_t total = 0;
  for (const auto& b : buffers) total += b.size();
  TripletBuffer all;
  all.reserve(total);
  for (const auto& b : buffers) all.insert(all.end(), b.begin(), b.end());
  SparseComplexMatrix a(n, n);
  a.setFromTriplets(all.begin(), all.end());
  return a;
}

// Element mass scaled by `weight`: meas·(1+δij)/((d+1)(d+2)).
void add_cell_mass(const Mesh& mesh, const DofLayout& layout, std::size_t c, double weight,
                   TripletBuffer& out) {
  const int d = mesh.topo_dim();
  const int field = layout.cell_field(c);
  const double base = weight * mesh.cells().measure[c] / ((d + 1.0) * (d + 2.0));
  auto verts = mesh.cell(c);
  for (int i = 0; i <= d; ++i) {
    const int di = layout.dof(field, verts[i]);
    for (int j = 0; j <= d; ++j) {
      out.emplace_back(di, layout.dof(field, verts[j]), base * (i == j ? 2.0 : 1.0));
    }
  }
}

// Facet P1 mass entry for a facet with d vertices: meas·(1+δab)/(d(d+1)).
double facet_mass_entry(const Mesh& mesh, int facet, int a, int b) {
  const int nv = mesh.topo_dim();
  return mesh.facets().measure[facet] * (a == b ? 2.0 : 1.0) / (nv * (nv + 1.0));
}

}  // namespace

DofLayout DofLayout::single(const Mesh& mesh) {
  DofLayout l;
  l.mode_ = LayoutMode::kSingle;
  l.vertex_dof_[0].resize(mesh.num_vertices());
  l.vertex_dof_[1].assign(mesh.num_vertices(), -1);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    l.vertex_dof_[0][v] = static_cast<int>(v);
    l.dof_vertex_.push_back(static_cast<int>(v));
  }
  l.cell_field_.assign(mesh.num_cells(), 0);
  l.num_dofs_ = static_cast<int>(mesh.num_vertices());
  l.field_offset_ = {0, l.num_dofs_};
  return l;
}

DofLayout DofLayout::pufem(const Mesh& mesh, std::span<const std::uint8_t> phase) {
  if (phase.size() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "phase function length does not match the cell count");
  }
  DofLayout l;
  l.mode_ = LayoutMode::kPufem;
  l.cell_field_.assign(phase.begin(), phase.end());
  std::array<std::vector<char>, 2> touched;
  touched[0].assign(mesh.num_vertices(), 0);
  touched[1].assign(mesh.num_vertices(), 0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    for (int v : mesh.cell(c)) touched[phase[c] ? 1 : 0][v] = 1;
  }
  int next = 0;
  for (int f = 0; f < 2; ++f) {
    l.field_offset_[f] = next;
    l.vertex_dof_[f].assign(mesh.num_vertices(), -1);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
      if (touched[f][v]) {
        l.vertex_dof_[f][v] = next++;
        l.dof_vertex_.push_back(static_cast<int>(v));
      }
    }
  }
  l.num_dofs_ = next;
  return l;
}

CellCoefficients CellCoefficients::uniform(std::size_t num_cells, double d, double t2) {
  CellCoefficients c;
  c.diffusion.assign(num_cells, d * Mat3::Identity());
  c.t2.assign(num_cells, t2);
  return c;
}

SparseComplexMatrix assemble_mass(const Mesh& mesh, const DofLayout& layout,
                                  const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  return assemble_cells(mesh.num_cells(), layout.num_dofs(), opts.threads,
                        [&](std::size_t c, TripletBuffer& out) { add_cell_mass(mesh, layout, c, 1.0, out); });
}

SparseComplexMatrix assemble_weighted_mass(const Mesh& mesh, std::span<const double> cell_weight,
                                           const DofLayout& layout, const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  check_cell_data(mesh, cell_weight.size(), "cell weights");
  return assemble_cells(mesh.num_cells(), layout.num_dofs(), opts.threads,
                        [&](std::size_t c, TripletBuffer& out) {
                          add_cell_mass(mesh, layout, c, cell_weight[c], out);
                        });
}

SparseComplexMatrix assemble_relaxation(const Mesh& mesh, std::span<const double> t2,
                                        const DofLayout& layout, const AssemblyOptions& opts) {
  check_cell_data(mesh, t2.size(), "T2 values");
  std::vector<double> rate(t2.size());
  for (std::size_t c = 0; c < t2.size(); ++c) {
    if (!(t2[c] > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "T2 of cell " + std::to_string(c) + " must be positive");
    }
    rate[c] = 1.0 / t2[c];
  }
  return assemble_weighted_mass(mesh, rate, layout, opts);
}

SparseComplexMatrix assemble_gradient_energy(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                             const Vec3& q, const DofLayout& layout,
                                             const AssemblyOptions& opts) {
  check_cell_data(mesh, diffusion.size(), "diffusion tensors");
  std::vector<double> weight(diffusion.size());
  for (std::size_t c = 0; c < diffusion.size(); ++c) weight[c] = q.dot(diffusion[c] * q);
  return assemble_weighted_mass(mesh, weight, layout, opts);
}

SparseComplexMatrix assemble_position_mass(const Mesh& mesh, const Vec3& q,
                                           const DofLayout& layout, const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  const int d = mesh.topo_dim();
  // ∫ φk φi φj = meas · d! · (multiplicity factorials) / (d+3)!
  const double scale = factorial(d) / factorial(d + 3);
  return assemble_cells(mesh.num_cells(), layout.num_dofs(), opts.threads,
                        [&](std::size_t c, TripletBuffer& out) {
                          auto verts = mesh.cell(c);
                          const int field = layout.cell_field(c);
                          const double meas = mesh.cells().measure[c];
                          std::array<double, 4> w{};
                          for (int k = 0; k <= d; ++k) w[k] = q.dot(mesh.vertex(verts[k]));
                          for (int i = 0; i <= d; ++i) {
                            for (int j = 0; j <= d; ++j) {
                              double sum = 0.0;
                              for (int k = 0; k <= d; ++k) {
                                double mult;
                                if (i == j) mult = (k == i) ? 6.0 : 2.0;
                                else mult = (k == i || k == j) ? 2.0 : 1.0;
                                sum += w[k] * mult;
                              }
                              out.emplace_back(layout.dof(field, verts[i]), layout.dof(field, verts[j]),
                                               meas * scale * sum);
                            }
                          }
                        });
}

SparseComplexMatrix assemble_stiffness(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                       const DofLayout& layout, const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  check_cell_data(mesh, diffusion.size(), "diffusion tensors");
  const int e = mesh.topo_dim() == mesh.embed_dim() ? mesh.embed_dim() : 3;
  for (std::size_t c = 0; c < diffusion.size(); ++c) {
    check_symmetric(diffusion[c], c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(diffusion[c].topLeftCorner(e, e));
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      fail(ErrorKind::kInvalidArgument,
           "diffusion tensor of cell " + std::to_string(c) + " is not positive definite");
    }
  }
  const int d = mesh.topo_dim();
  return assemble_cells(mesh.num_cells(), layout.num_dofs(), opts.threads,
                        [&](std::size_t c, TripletBuffer& out) {
                          auto verts = mesh.cell(c);
                          auto grads = mesh.cell_gradients(c);
                          const int field = layout.cell_field(c);
                          const double meas = mesh.cells().measure[c];
                          for (int i = 0; i <= d; ++i) {
                            const Vec3 dgi = diffusion[c] * grads[i];
                            for (int j = 0; j <= d; ++j) {
                              out.emplace_back(layout.dof(field, verts[i]), layout.dof(field, verts[j]),
                                               meas * grads[j].dot(dgi));
                            }
                          }
                        });
}

SparseComplexMatrix assemble_convection(const Mesh& mesh, const std::vector<Mat3>& diffusion,
                                        const Vec3& q, const DofLayout& layout,
                                        const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  check_cell_data(mesh, diffusion.size(), "diffusion tensors");
  for (std::size_t c = 0; c < diffusion.size(); ++c) check_symmetric(diffusion[c], c);
  const int d = mesh.topo_dim();
  return assemble_cells(mesh.num_cells(), layout.num_dofs(), opts.threads,
                        [&](std::size_t c, TripletBuffer& out) {
                          auto verts = mesh.cell(c);
                          auto grads = mesh.cell_gradients(c);
                          const int field = layout.cell_field(c);
                          const double scale = 2.0 * mesh.cells().measure[c] / (d + 1.0);
                          const Vec3 dq = diffusion[c] * q;
                          for (int i = 0; i <= d; ++i) {
                            for (int j = 0; j <= d; ++j) {
                              out.emplace_back(layout.dof(field, verts[i]), layout.dof(field, verts[j]),
                                               scale * dq.dot(grads[j]));
                            }
                          }
                        });
}

SparseComplexMatrix assemble_interface(const Mesh& mesh, const InterfaceFacetSet& gamma,
                                       double kappa, const DofLayout& layout) {
  check_layout(mesh, layout);
  if (layout.mode() != LayoutMode::kPufem) {
    fail(ErrorKind::kSupport, "interface terms need the two-field (PUFEM) layout");
  }
  TripletBuffer trip;
  for (int f : gamma.facets) {
    auto fv = mesh.facet_vertices(f);
    for (int v : fv) {
      if (layout.dof(0, v) < 0 || layout.dof(1, v) < 0) {
        fail(ErrorKind::kSupport, "interface facet " + std::to_string(f) + " lacks dofs in one field");
      }
    }
    for (std::size_t a = 0; a < fv.size(); ++a) {
      for (std::size_t b = 0; b < fv.size(); ++b) {
        const double m = kappa * facet_mass_entry(mesh, f, static_cast<int>(a), static_cast<int>(b));
        for (int fi = 0; fi < 2; ++fi) {
          for (int fj = 0; fj < 2; ++fj) {
            const double sign = fi == fj ? 1.0 : -1.0;
            trip.emplace_back(layout.dof(fi, fv[a]), layout.dof(fj, fv[b]), sign * m);
          }
        }
      }
    }
  }
  SparseComplexMatrix a(layout.num_dofs(), layout.num_dofs());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

InterfaceStrongTerms assemble_interface_strong(const Mesh& mesh, const InterfaceFacetSet& gamma,
                                               const std::vector<Mat3>& diffusion, const Vec3& q,
                                               const DofLayout& layout) {
  check_layout(mesh, layout);
  check_cell_data(mesh, diffusion.size(), "diffusion tensors");
  if (layout.mode() != LayoutMode::kPufem) {
    fail(ErrorKind::kSupport, "interface terms need the two-field (PUFEM) layout");
  }
  TripletBuffer jump, avg;
  for (std::size_t k = 0; k < gamma.facets.size(); ++k) {
    const int f = gamma.facets[k];
    const Vec3& n0 = gamma.normals[k];
    const std::array<double, 2> w{(diffusion[gamma.phase0_cell[k]] * q).dot(n0),
                                  -(diffusion[gamma.phase1_cell[k]] * q).dot(n0)};
    auto fv = mesh.facet_vertices(f);
    for (int v : fv) {
      if (layout.dof(0, v) < 0 || layout.dof(1, v) < 0) {
        fail(ErrorKind::kSupport, "interface facet " + std::to_string(f) + " lacks dofs in one field");
      }
    }
    for (std::size_t a = 0; a < fv.size(); ++a) {
      for (std::size_t b = 0; b < fv.size(); ++b) {
        const double m = facet_mass_entry(mesh, f, static_cast<int>(a), static_cast<int>(b));
        for (int fi = 0; fi < 2; ++fi) {
          for (int fj = 0; fj < 2; ++fj) {
            const double sign = fi == fj ? 1.0 : -1.0;
            const int row = layout.dof(fi, fv[a]);
            const int col = layout.dof(fj, fv[b]);
            jump.emplace_back(row, col, sign * w[fj] * m);
            avg.emplace_back(row, col, 0.25 * w[fj] * m);
          }
        }
      }
    }
  }
  InterfaceStrongTerms out{SparseComplexMatrix(layout.num_dofs(), layout.num_dofs()),
                           SparseComplexMatrix(layout.num_dofs(), layout.num_dofs())};
  out.jump.setFromTriplets(jump.begin(), jump.end());
  out.average.setFromTriplets(avg.begin(), avg.end());
  return out;
}

namespace {

template <class Weight>
SparseComplexMatrix assemble_facets(const Mesh& mesh, std::span<const int> facets,
                                    const DofLayout& layout, Weight&& weight) {
  TripletBuffer trip;
  for (int f : facets) {
    auto cells = mesh.facet_cells(f);
    if (cells.size() != 1) {
      fail(ErrorKind::kInvalidArgument, "facet " + std::to_string(f) + " is not an exterior facet");
    }
    const int c = cells[0];
    const int field = layout.cell_field(c);
    const double w = weight(f, c);
    auto fv = mesh.facet_vertices(f);
    for (std::size_t a = 0; a < fv.size(); ++a) {
      for (std::size_t b = 0; b < fv.size(); ++b) {
        trip.emplace_back(layout.dof(field, fv[a]), layout.dof(field, fv[b]),
                          w * facet_mass_entry(mesh, f, static_cast<int>(a), static_cast<int>(b)));
      }
    }
  }
  SparseComplexMatrix a(layout.num_dofs(), layout.num_dofs());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace

SparseComplexMatrix assemble_boundary(const Mesh& mesh, std::span<const int> facets,
                                      const std::vector<Mat3>& diffusion, const Vec3& q,
                                      const DofLayout& layout) {
  check_layout(mesh, layout);
  check_cell_data(mesh, diffusion.size(), "diffusion tensors");
  return assemble_facets(mesh, facets, layout, [&](int f, int c) {
    return (diffusion[c] * q).dot(mesh.facets().normal[f]);
  });
}

SparseComplexMatrix assemble_facet_mass(const Mesh& mesh, std::span<const int> facets,
                                        const DofLayout& layout) {
  check_layout(mesh, layout);
  return assemble_facets(mesh, facets, layout, [](int, int) { return 1.0; });
}

std::vector<int> exterior_facets(const Mesh& mesh) {
  std::vector<int> out;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    if (mesh.is_boundary_facet(f)) out.push_back(static_cast<int>(f));
  }
  return out;
}

FemSystem assemble_system(const Mesh& mesh, std::span<const std::uint8_t> phase,
                          const DofLayout& layout, const CellCoefficients& coeffs,
                          const SystemSpec& spec, const AssemblyOptions& opts) {
  check_layout(mesh, layout);
  if (!(spec.kappa >= 0.0)) fail(ErrorKind::kInvalidArgument, "permeability must be non-negative");
  const Vec3& q = spec.direction;
  for (int k = mesh.embed_dim(); k < 3; ++k) {
    if (q[k] != 0.0) {
      fail(ErrorKind::kInvalidArgument,
           "gradient direction has components outside the mesh embedding dimension");
    }
  }
  FemSystem sys;
  sys.layout = layout;
  sys.direction = q;
  sys.formulation = spec.formulation;
  sys.M = assemble_mass(mesh, layout, opts);
  sys.S = assemble_stiffness(mesh, coeffs.diffusion, layout, opts);
  sys.R = assemble_relaxation(mesh, coeffs.t2, layout, opts);

  InterfaceFacetSet gamma;
  if (layout.mode() == LayoutMode::kPufem) {
    gamma = interface_facets(mesh, phase);
    sys.I = assemble_interface(mesh, gamma, spec.kappa, layout);
  }
  if (spec.formulation == Formulation::kDirect) {
    sys.J = assemble_position_mass(mesh, q, layout, opts);
  } else {
    sys.C = assemble_convection(mesh, coeffs.diffusion, q, layout, opts);
    sys.Q = assemble_gradient_energy(mesh, coeffs.diffusion, q, layout, opts);
    if (layout.mode() == LayoutMode::kPufem) {
      auto strong = assemble_interface_strong(mesh, gamma, coeffs.diffusion, q, layout);
      sys.K1 = std::move(strong.jump);
      sys.K2 = std::move(strong.average);
    }
    if (spec.neumann_boundary_terms) {
      sys.B = assemble_boundary(mesh, exterior_facets(mesh), coeffs.diffusion, q, layout);
    }
  }
  return sys;
}

std::string to_matrix_market(const SparseComplexMatrix& a) {
  std::ostringstream os;
  os.precision(17);
  os << "%%MatrixMarket matrix coordinate complex general\n";
  os << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  for (int r = 0; r < a.outerSize(); ++r) {
    for (SparseComplexMatrix::InnerIterator it(a, r); it; ++it) {
      os << it.row() + 1 << " " << it.col() + 1 << " " << it.value().real() << " "
         << it.value().imag() << "\n";
    }
  }
  return os.str();
}

}  // namespace btsim
