#include "btsim/mesh.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace btsim {
namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

std::string format_point(const Vec3& p, int dim) {
  std::ostringstream os;
  os.precision(12);
  os << "(";
  for (int k = 0; k < dim; ++k) os << (k ? ", " : "") << p[k];
  os << ")";
  return os.str();
}

}  // namespace

Mesh::Mesh(int embed_dim, int topo_dim, std::vector<Vec3> vertices,
           std::vector<int> cell_vertices)
    : embed_dim_(embed_dim),
      topo_dim_(topo_dim),
      vertices_(std::move(vertices)),
      cell_vertices_(std::move(cell_vertices)) {
  if (embed_dim_ < 1 || embed_dim_ > 3 || topo_dim_ < 1 || topo_dim_ > embed_dim_) {
    fail(ErrorKind::kInvalidArgument, "mesh dimensions must satisfy 1 <= topo_dim <= embed_dim <= 3");
  }
  const auto nv = static_cast<std::size_t>(vertices_per_cell());
  if (cell_vertices_.empty() || cell_vertices_.size() % nv != 0) {
    fail(ErrorKind::kInvalidArgument, "cell connectivity must hold a positive multiple of topo_dim+1 indices");
  }
  num_cells_ = cell_vertices_.size() / nv;
  for (std::size_t c = 0; c < num_cells_; ++c) {
    auto verts = cell(c);
    for (int v : verts) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size()) {
        fail(ErrorKind::kInvalidArgument,
             "cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                 " outside [0, " + std::to_string(vertices_.size()) + ")");
      }
    }
  }
  for (auto& x : vertices_) {
    for (int k = embed_dim_; k < 3; ++k) x[k] = 0.0;
  }
  build_geometry();
  build_facets();
}

void Mesh::build_geometry() {
  const int d = topo_dim_;
  const int nv = d + 1;
  cell_geometry_.measure.resize(num_cells_);
  cell_geometry_.diameter.resize(num_cells_);
  cell_geometry_.centroid.resize(num_cells_);
  cell_geometry_.gradients.resize(num_cells_ * nv);
  const double dfact = factorial(d);

  for (std::size_t c = 0; c < num_cells_; ++c) {
    auto verts = cell(c);
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, d);
    Vec3 centroid = Vec3::Zero();
    double diameter = 0.0;
    for (int i = 0; i < nv; ++i) {
      centroid += vertices_[verts[i]];
      for (int j = i + 1; j < nv; ++j) {
        diameter = std::max(diameter, (vertices_[verts[i]] - vertices_[verts[j]]).norm());
      }
    }
    for (int i = 0; i < d; ++i) jac.col(i) = vertices_[verts[i + 1]] - vertices_[verts[0]];
    const Eigen::MatrixXd gram = jac.transpose() * jac;
    const double det = gram.determinant();
    const double measure = det > 0.0 ? std::sqrt(det) / dfact : 0.0;
    if (!(measure > 1e-12 * std::pow(diameter, d))) {
      fail(ErrorKind::kDegenerateGeometry,
           "cell " + std::to_string(c) + " has (near) zero measure");
    }
    cell_geometry_.measure[c] = measure;
    cell_geometry_.diameter[c] = diameter;
    cell_geometry_.centroid[c] = centroid / nv;

    const Eigen::MatrixXd ginv = gram.inverse();
    const Eigen::Matrix<double, 3, Eigen::Dynamic> pinv = jac * ginv;
    Vec3 sum = Vec3::Zero();
    for (int i = 1; i < nv; ++i) {
      cell_geometry_.gradients[c * nv + i] = pinv.col(i - 1);
      sum += pinv.col(i - 1);
    }
    cell_geometry_.gradients[c * nv] = -sum;
  }
}

void Mesh::build_facets() {
  const int d = topo_dim_;
  const int nv = d + 1;
  struct Entry {
    std::array<int, 3> key;
    int cell;
    int local;
  };
  std::vector<Entry> entries;
  entries.reserve(num_cells_ * nv);
  for (std::size_t c = 0; c < num_cells_; ++c) {
    auto verts = cell(c);
    for (int j = 0; j < nv; ++j) {
      Entry e{{-1, -1, -1}, static_cast<int>(c), j};
      int m = 0;
      for (int i = 0; i < nv; ++i) {
        if (i != j) e.key[m++] = verts[i];
      }
      std::sort(e.key.begin(), e.key.begin() + d);
      entries.push_back(e);
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.cell < b.cell;
  });

  cell_facets_.assign(num_cells_ * nv, -1);
  facet_offsets_.assign(1, 0);
  facet_vertices_.clear();
  facet_cells_.clear();
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    const int fid = static_cast<int>(facet_offsets_.size()) - 1;
    while (j < entries.size() && entries[j].key == entries[i].key) {
      facet_cells_.push_back(entries[j].cell);
      cell_facets_[entries[j].cell * nv + entries[j].local] = fid;
      ++j;
    }
    if (j - i > 2 && topo_dim_ == embed_dim_) {
      fail(ErrorKind::kUnsupportedMesh,
           "facet shared by " + std::to_string(j - i) + " cells in a volume mesh");
    }
    for (int k = 0; k < d; ++k) facet_vertices_.push_back(entries[i].key[k]);
    facet_offsets_.push_back(static_cast<int>(facet_cells_.size()));
    i = j;
  }

  const std::size_t nf = num_facets();
  facet_geometry_.measure.resize(nf);
  facet_geometry_.normal.resize(nf);
  facet_geometry_.centroid.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    auto fv = facet_vertices(f);
    Vec3 centroid = Vec3::Zero();
    for (int v : fv) centroid += vertices_[v];
    facet_geometry_.centroid[f] = centroid / d;
    if (d == 1) {
      facet_geometry_.measure[f] = 1.0;
    } else if (d == 2) {
      facet_geometry_.measure[f] = (vertices_[fv[1]] - vertices_[fv[0]]).norm();
    } else {
      facet_geometry_.measure[f] =
          0.5 * (vertices_[fv[1]] - vertices_[fv[0]]).cross(vertices_[fv[2]] - vertices_[fv[0]]).norm();
    }
    const int c0 = facet_cells(f)[0];
    int local = -1;
    for (int j = 0; j < nv; ++j) {
      if (cell_facet(c0, j) == static_cast<int>(f)) local = j;
    }
    const Vec3& grad = cell_geometry_.gradients[c0 * nv + local];
    facet_geometry_.normal[f] = -grad / grad.norm();
  }
}

Vec3 Mesh::lower_corner() const {
  Vec3 lo = vertices_.front();
  for (const auto& x : vertices_) lo = lo.cwiseMin(x);
  return lo;
}

Vec3 Mesh::upper_corner() const {
  Vec3 hi = vertices_.front();
  for (const auto& x : vertices_) hi = hi.cwiseMax(x);
  return hi;
}

double Mesh::total_measure() const {
  return std::accumulate(cell_geometry_.measure.begin(), cell_geometry_.measure.end(), 0.0);
}

Mesh build_structured_mesh(std::span<const double> p0, std::span<const double> p1,
                           std::span<const int> n) {
  const std::size_t dim = p0.size();
  if (dim < 1 || dim > 3 || p1.size() != dim || n.size() != dim) {
    fail(ErrorKind::kInvalidArgument, "structured mesh needs matching 1-3 dimensional corners and counts");
  }
  for (std::size_t k = 0; k < dim; ++k) {
    if (!(p1[k] > p0[k])) fail(ErrorKind::kInvalidArgument, "structured mesh extent must be positive along every axis");
    if (n[k] < 1) fail(ErrorKind::kInvalidArgument, "structured mesh needs at least one subdivision per axis");
  }
  std::array<int, 3> cnt{1, 1, 1};
  for (std::size_t k = 0; k < dim; ++k) cnt[k] = n[k];
  const int nx = cnt[0] + 1;
  const int ny = dim > 1 ? cnt[1] + 1 : 1;
  const int nz = dim > 2 ? cnt[2] + 1 : 1;
  auto coord = [&](std::size_t k, int i) {
    // Endpoints are hit exactly so opposite faces line up bit-for-bit.
    if (i == cnt[k]) return p1[k];
    return p0[k] + (p1[k] - p0[k]) * static_cast<double>(i) / cnt[k];
  };

  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        Vec3 x = Vec3::Zero();
        x[0] = coord(0, i);
        if (dim > 1) x[1] = coord(1, j);
        if (dim > 2) x[2] = coord(2, k);
        verts.push_back(x);
      }
    }
  }
  auto vid = [&](int i, int j, int k) { return i + nx * (j + ny * k); };

  std::vector<int> cells;
  if (dim == 1) {
    for (int i = 0; i < cnt[0]; ++i) {
      cells.insert(cells.end(), {vid(i, 0, 0), vid(i + 1, 0, 0)});
    }
  } else if (dim == 2) {
    for (int j = 0; j < cnt[1]; ++j) {
      for (int i = 0; i < cnt[0]; ++i) {
        const int v00 = vid(i, j, 0), v10 = vid(i + 1, j, 0);
        const int v01 = vid(i, j + 1, 0), v11 = vid(i + 1, j + 1, 0);
        cells.insert(cells.end(), {v00, v10, v11, v00, v11, v01});
      }
    }
  } else {
    static constexpr std::array<std::array<int, 3>, 6> kPerms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int k = 0; k < cnt[2]; ++k) {
      for (int j = 0; j < cnt[1]; ++j) {
        for (int i = 0; i < cnt[0]; ++i) {
          for (const auto& perm : kPerms) {
            std::array<int, 3> idx{i, j, k};
            cells.push_back(vid(idx[0], idx[1], idx[2]));
            for (int step = 0; step < 2; ++step) {
              ++idx[perm[step]];
              cells.push_back(vid(idx[0], idx[1], idx[2]));
            }
            cells.push_back(vid(i + 1, j + 1, k + 1));
          }
        }
      }
    }
  }
  return Mesh(static_cast<int>(dim), static_cast<int>(dim), std::move(verts), std::move(cells));
}

LayeredDisk build_layered_disk(std::span<const double> radii,
                               std::span<const int> radial_cells, int segments) {
  if (radii.empty() || radial_cells.size() != radii.size()) {
    fail(ErrorKind::kInvalidArgument, "layered disk needs one radial cell count per radius");
  }
  if (segments < 3) fail(ErrorKind::kInvalidArgument, "layered disk needs at least 3 segments");
  double prev = 0.0;
  std::vector<double> levels;
  std::vector<int> level_layer;
  for (std::size_t l = 0; l < radii.size(); ++l) {
    if (!(radii[l] > prev) || radial_cells[l] < 1) {
      fail(ErrorKind::kInvalidArgument, "layered disk radii must increase and counts be positive");
    }
    for (int m = 1; m <= radial_cells[l]; ++m) {
      levels.push_back(m == radial_cells[l] ? radii[l]
                                            : prev + (radii[l] - prev) * m / radial_cells[l]);
      level_layer.push_back(static_cast<int>(l));
    }
    prev = radii[l];
  }

  std::vector<Vec3> verts{Vec3::Zero()};
  for (double r : levels) {
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      verts.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
    }
  }
  auto ring = [&](std::size_t m, int s) { return 1 + static_cast<int>(m) * segments + (s % segments); };

  std::vector<int> cells;
  CompartmentMarker marker;
  for (int s = 0; s < segments; ++s) {
    cells.insert(cells.end(), {0, ring(0, s), ring(0, s + 1)});
    marker.push_back(level_layer[0]);
  }
  for (std::size_t m = 0; m + 1 < levels.size(); ++m) {
    for (int s = 0; s < segments; ++s) {
      const int a = ring(m, s), b = ring(m, s + 1), c = ring(m + 1, s + 1), d = ring(m + 1, s);
      cells.insert(cells.end(), {a, b, c, a, c, d});
      marker.push_back(level_layer[m + 1]);
      marker.push_back(level_layer[m + 1]);
    }
  }
  return {Mesh(2, 2, std::move(verts), std::move(cells)), std::move(marker)};
}

Mesh build_branched_tree(int levels, double root_length, int cells_per_branch) {
  if (levels < 1 || cells_per_branch < 1 || !(root_length > 0.0)) {
    fail(ErrorKind::kInvalidArgument, "branched tree needs levels >= 1, cells >= 1, length > 0");
  }
  struct Branch {
    int start;
    Vec3 origin, dir, bend_axis;
    double length;
    int level;
  };
  std::vector<Vec3> verts{Vec3::Zero()};
  std::vector<int> cells;
  std::vector<Branch> todo{{0, Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitX(), root_length, 1}};
  const double spread = 35.0 * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const Branch br = todo[i];
    int prev = br.start;
    for (int k = 1; k <= cells_per_branch; ++k) {
      verts.push_back(br.origin + br.dir * (br.length * k / cells_per_branch));
      const int v = static_cast<int>(verts.size()) - 1;
      cells.insert(cells.end(), {prev, v});
      prev = v;
    }
    if (br.level == levels) continue;
    // Children bend by ±spread about an axis that turns 90° every generation.
    const Vec3 next_axis = br.dir.cross(br.bend_axis).normalized();
    for (double sign : {1.0, -1.0}) {
      const Vec3 d = Eigen::AngleAxisd(sign * spread, br.bend_axis) * br.dir;
      todo.push_back({prev, verts[prev], d.normalized(), next_axis, 0.8 * br.length, br.level + 1});
    }
  }
  return Mesh(3, 1, std::move(verts), std::move(cells));
}

PhaseFunction phase_from_marker(std::span<const int> marker) {
  PhaseFunction phase(marker.size());
  for (std::size_t c = 0; c < marker.size(); ++c) {
    phase[c] = static_cast<std::uint8_t>(((marker[c] % 2) + 2) % 2);
  }
  return phase;
}

InterfaceFacetSet interface_facets(const Mesh& mesh, std::span<const std::uint8_t> phase) {
  if (phase.size() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "phase function length does not match the cell count");
  }
  InterfaceFacetSet out;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    auto cells = mesh.facet_cells(f);
    if (cells.size() < 2) continue;
    bool mixed = false;
    for (int c : cells) mixed |= phase[c] != phase[cells[0]];
    if (!mixed) continue;
    if (cells.size() > 2) {
      fail(ErrorKind::kUnsupportedMesh,
           "junction facet " + std::to_string(f) + " joins cells of different phase");
    }
    const bool first_is_zero = phase[cells[0]] == 0;
    out.facets.push_back(static_cast<int>(f));
    out.normals.push_back(first_is_zero ? mesh.facets().normal[f] : Vec3(-mesh.facets().normal[f]));
    out.phase0_cell.push_back(first_is_zero ? cells[0] : cells[1]);
    out.phase1_cell.push_back(first_is_zero ? cells[1] : cells[0]);
  }
  return out;
}

FacetPairing FacetPairing::reversed() const {
  FacetPairing r;
  r.axis = axis;
  r.shift = -shift;
  for (auto [m, s] : facets) r.facets.emplace_back(s, m);
  for (auto [m, s] : vertices) r.vertices.emplace_back(s, m);
  std::sort(r.facets.begin(), r.facets.end());
  std::sort(r.vertices.begin(), r.vertices.end());
  return r;
}

FacetPairing find_periodic_pairs(const Mesh& mesh, int axis, double tol) {
  if (axis < 0 || axis >= mesh.embed_dim()) {
    fail(ErrorKind::kInvalidArgument, "periodic axis outside the embedding dimension");
  }
  const Vec3 lo = mesh.lower_corner();
  const Vec3 hi = mesh.upper_corner();
  const double extent = hi[axis] - lo[axis];
  if (!(extent > 0.0)) fail(ErrorKind::kPairingFailure, "mesh has zero extent along the periodic axis");
  const double atol = tol * extent;

  auto on_plane = [&](std::size_t f, double value) {
    for (int v : mesh.facet_vertices(f)) {
      if (std::abs(mesh.vertex(v)[axis] - value) > atol) return false;
    }
    return true;
  };

  std::vector<int> master_facets, slave_facets;
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    if (on_plane(f, lo[axis])) master_facets.push_back(static_cast<int>(f));
    else if (on_plane(f, hi[axis])) slave_facets.push_back(static_cast<int>(f));
  }

  std::vector<int> slave_verts;
  for (int f : slave_facets) {
    for (int v : mesh.facet_vertices(f)) slave_verts.push_back(v);
  }
  std::sort(slave_verts.begin(), slave_verts.end());
  slave_verts.erase(std::unique(slave_verts.begin(), slave_verts.end()), slave_verts.end());
  const int key_axis = mesh.embed_dim() == 1 ? axis : (axis == 0 ? 1 : 0);
  std::sort(slave_verts.begin(), slave_verts.end(), [&](int a, int b) {
    return mesh.vertex(a)[key_axis] < mesh.vertex(b)[key_axis];
  });

  Vec3 shift = Vec3::Zero();
  shift[axis] = extent;
  std::map<int, int> vertex_map;
  auto match_vertex = [&](int v) -> int {
    if (auto it = vertex_map.find(v); it != vertex_map.end()) return it->second;
    const Vec3 target = mesh.vertex(v) + shift;
    auto first = std::lower_bound(slave_verts.begin(), slave_verts.end(), target[key_axis] - atol,
                                  [&](int s, double key) { return mesh.vertex(s)[key_axis] < key; });
    int found = -1;
    for (auto it = first; it != slave_verts.end() && mesh.vertex(*it)[key_axis] <= target[key_axis] + atol; ++it) {
      if ((mesh.vertex(*it) - target).norm() <= atol) {
        found = *it;
        break;
      }
    }
    vertex_map.emplace(v, found);
    return found;
  };

  std::map<std::array<int, 3>, int> slave_index;
  for (int f : slave_facets) {
    std::array<int, 3> key{-1, -1, -1};
    auto fv = mesh.facet_vertices(f);
    std::copy(fv.begin(), fv.end(), key.begin());
    slave_index.emplace(key, f);
  }

  FacetPairing out;
  out.axis = axis;
  out.shift = extent;
  auto pairing_failure = [&](int f) {
    std::ostringstream os;
    os << "no periodic partner along axis " << axis << " for facet centred at "
       << format_point(mesh.facets().centroid[f], mesh.embed_dim());
    fail(ErrorKind::kPairingFailure, os.str());
  };
  std::vector<char> slave_used(mesh.num_facets(), 0);
  for (int f : master_facets) {
    std::array<int, 3> key{-1, -1, -1};
    int m = 0;
    for (int v : mesh.facet_vertices(f)) {
      const int s = match_vertex(v);
      if (s < 0) pairing_failure(f);
      key[m++] = s;
    }
    std::sort(key.begin(), key.begin() + m);
    auto it = slave_index.find(key);
    if (it == slave_index.end() || slave_used[it->second]) pairing_failure(f);
    slave_used[it->second] = 1;
    out.facets.emplace_back(f, it->second);
  }
  for (int f : slave_facets) {
    if (!slave_used[f]) pairing_failure(f);
  }
  for (auto [m, s] : vertex_map) out.vertices.emplace_back(m, s);
  return out;
}

Mesh submesh(const Mesh& mesh, std::span<const bool> keep) {
  if (keep.size() != mesh.num_cells()) fail(ErrorKind::kDimension, "submesh mask length mismatch");
  std::vector<int> renumber(mesh.num_vertices(), -1);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (!keep[c]) continue;
    for (int v : mesh.cell(c)) renumber[v] = 0;
  }
  std::vector<Vec3> verts;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (renumber[v] == 0) {
      renumber[v] = static_cast<int>(verts.size());
      verts.push_back(mesh.vertex(v));
    }
  }
  std::vector<int> cells;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    if (!keep[c]) continue;
    for (int v : mesh.cell(c)) cells.push_back(renumber[v]);
  }
  return Mesh(mesh.embed_dim(), mesh.topo_dim(), std::move(verts), std::move(cells));
}

}  // namespace btsim
