#include "btsim/stepper.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace btsim {

CombinedOperator::CombinedOperator(std::vector<const SparseComplexMatrix*> parts) {
  if (parts.empty()) fail(ErrorKind::kInvalidArgument, "combined operator needs at least one part");
  const auto n = parts[0]->rows();
  // Union pattern: structural sum with unit magnitudes so nothing cancels.
  std::vector<Eigen::Triplet<Complex>> trip;
  for (const auto* p : parts) {
    if (p->rows() != n || p->cols() != n) fail(ErrorKind::kDimension, "combined parts differ in size");
    for (int r = 0; r < p->outerSize(); ++r) {
      for (SparseComplexMatrix::InnerIterator it(*p, r); it; ++it) trip.emplace_back(it.row(), it.col(), 1.0);
    }
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  for (const auto* p : parts) {
    std::vector<Complex> vals(pattern_.nonZeros(), Complex(0.0));
    for (int r = 0; r < p->outerSize(); ++r) {
      int k = outer[r];
      for (SparseComplexMatrix::InnerIterator it(*p, r); it; ++it) {
        while (inner[k] != it.col()) ++k;  // both rows are column-sorted
        vals[k] += it.value();
      }
    }
    values_.push_back(std::move(vals));
  }
}

void CombinedOperator::combine(std::span<const Complex> coeffs, SparseComplexMatrix& out) const {
  if (coeffs.size() != values_.size()) fail(ErrorKind::kDimension, "coefficient count mismatch");
  if (out.rows() != pattern_.rows() || out.nonZeros() != pattern_.nonZeros() || !out.isCompressed()) {
    out = pattern_;
  }
  Complex* v = out.valuePtr();
  const auto nnz = static_cast<std::size_t>(pattern_.nonZeros());
  std::fill(v, v + nnz, Complex(0.0));
  for (std::size_t p = 0; p < values_.size(); ++p) {
    const Complex c = coeffs[p];
    if (c == Complex(0.0)) continue;
    const auto& vals = values_[p];
    for (std::size_t k = 0; k < nnz; ++k) v[k] += c * vals[k];
  }
}

std::vector<double> time_grid(const TemporalProfile& profile, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorKind::kInvalidArgument, "time step must be positive");
  const double t_end = profile.echo_time();
  const double eps = 1e-9 * t_end;
  std::vector<double> pts = profile.breakpoints();
  const auto breaks = pts;
  const auto steps = static_cast<long>(std::floor(t_end / dt + 1e-9));
  for (long k = 1; k <= steps; ++k) {
    const double t = k * dt;
    const bool near_break = std::any_of(breaks.begin(), breaks.end(),
                                        [&](double b) { return std::abs(b - t) <= eps; });
    if (!near_break && t < t_end - eps) pts.push_back(t);
  }
  pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

namespace {

// Fixed constituent order shared by every formulation.
enum Part { kM, kJ, kC, kQ, kR, kS, kI, kK1, kK2, kB, kW, kNumParts };

const SparseComplexMatrix& or_empty(const SparseComplexMatrix& a, const SparseComplexMatrix& zero) {
  return a.rows() == 0 ? zero : a;
}

}  // namespace

Simulation::Simulation(const Mesh& mesh, std::span<const std::uint8_t> phase,
                       const CellCoefficients& coeffs, std::span<const double> initial,
                       const Options& opts)
    : opts_(opts) {
  if (phase.size() != mesh.num_cells() || initial.size() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "phase and initial values need one entry per cell");
  }
  if (opts.boundary == BoundaryMode::kPeriodicStrong && opts.formulation != Formulation::kTransformed) {
    fail(ErrorKind::kConfiguration, "strong periodic boundaries need the transformed formulation");
  }
  if (opts.boundary == BoundaryMode::kPeriodicWeak && opts.formulation != Formulation::kDirect) {
    fail(ErrorKind::kConfiguration, "weak periodic boundaries need the direct formulation");
  }
  const bool two_phase = std::any_of(phase.begin(), phase.end(), [](auto p) { return p == 1; }) &&
                         std::any_of(phase.begin(), phase.end(), [](auto p) { return p == 0; });
  const DofLayout layout = two_phase ? DofLayout::pufem(mesh, phase) : DofLayout::single(mesh);

  SystemSpec spec;
  spec.formulation = opts.formulation;
  spec.direction = opts.direction;
  spec.kappa = opts.kappa;
  spec.neumann_boundary_terms = opts.boundary == BoundaryMode::kNeumann;
  system_ = assemble_system(mesh, phase, layout, coeffs, spec, opts.assembly);

  const int n = layout.num_dofs();
  vertex_coords_.resize(n);
  for (int d = 0; d < n; ++d) vertex_coords_[d] = mesh.vertex(layout.dof_vertex(d));
  initial_ = ComplexVector::Zero(n);
  std::vector<char> set(n, 0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const int f = layout.cell_field(c);
    for (int v : mesh.cell(c)) {
      const int d = layout.dof(f, v);
      if (!set[d]) {
        initial_[d] = initial[c];
        set[d] = 1;
      }
    }
  }
  mass_row_sums_ = system_.M * ComplexVector::Ones(n);

  SparseComplexMatrix w;
  if (opts.boundary == BoundaryMode::kPeriodicWeak) {
    weak_ = WeakPeriodicData::build(mesh, layout, coeffs.diffusion);
    w = weak_->own_mass();
  }
  if (opts.boundary == BoundaryMode::kPeriodicStrong) {
    std::vector<int> axes;
    for (int k = 0; k < mesh.embed_dim(); ++k) axes.push_back(k);
    if (mesh.topo_dim() != mesh.embed_dim()) {
      fail(ErrorKind::kUnsupportedMesh, "periodic boundaries need a volume (non-manifold) mesh");
    }
    constraint_ = PeriodicConstraint::build(mesh, layout, axes);
  }

  const SparseComplexMatrix zero(n, n);
  const std::array<const SparseComplexMatrix*, kNumParts> full = {
      &system_.M, &or_empty(system_.J, zero), &or_empty(system_.C, zero), &or_empty(system_.Q, zero),
      &system_.R, &system_.S, &or_empty(system_.I, zero), &or_empty(system_.K1, zero),
      &or_empty(system_.K2, zero), &or_empty(system_.B, zero), &or_empty(w, zero)};
  for (const auto* p : full) parts_.push_back(constraint_ ? constraint_->reduce(*p) : *p);
  std::vector<const SparseComplexMatrix*> ptrs;
  for (const auto& p : parts_) ptrs.push_back(&p);
  combined_ = CombinedOperator(std::move(ptrs));
}

void Simulation::step_coefficients(double f, double big_f, double g, std::vector<Complex>& k) const {
  const Complex i(0.0, 1.0);
  const double gamma = kGyromagneticRatio;
  k.assign(kNumParts, Complex(0.0));
  k[kR] = k[kS] = k[kI] = 1.0;
  if (opts_.formulation == Formulation::kDirect) {
    k[kJ] = i * gamma * g * f;
  } else {
    const double phase = gamma * g * big_f;
    k[kC] = i * phase;
    k[kQ] = phase * phase;
    k[kK1] = -0.5 * i * phase;
    k[kK2] = -2.0 * i * phase;
    k[kB] = -i * phase;
  }
}

ComplexVector Simulation::run(const TemporalProfile& profile, double g, const StepperConfig& cfg,
                              const StepObserver& observer) const {
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) fail(ErrorKind::kInvalidArgument, "theta must lie in [0, 1]");
  if (!(g >= 0.0)) fail(ErrorKind::kInvalidArgument, "gradient amplitude must be non-negative");
  const auto grid = time_grid(profile, cfg.dt);
  const double theta = cfg.theta;
  const double kappa_e = weak_ ? weak_->kappa_e() : 0.0;

  ComplexVector u = constraint_ ? constraint_->restrict_values(initial_) : initial_;
  const int n = static_cast<int>(u.size());
  const bool direct = use_direct(cfg.solver, n);

  struct CacheEntry {
    std::vector<Complex> key;
    SparseComplexMatrix a;
    DirectSolver lu;
  };
  std::vector<CacheEntry> cache;  // most recently used last
  constexpr std::size_t kCacheSize = 6;

  std::vector<Complex> k_impl, k_expl, ca(kNumParts);
  SparseComplexMatrix a_iter;
  for (std::size_t step = 1; step < grid.size(); ++step) {
    const double t0 = grid[step - 1], t1 = grid[step];
    const double k = t1 - t0;
    // f is taken from inside the step: its right limit at t0 and left limit at t1.
    step_coefficients(profile.f(t1), profile.integral(t1), g, k_impl);
    step_coefficients(profile.f_right(t0), profile.integral(t0), g, k_expl);

    ComplexVector rhs = parts_[kM] * u / k;
    for (int p = kJ; p < kW; ++p) {
      if (k_expl[p] != Complex(0.0) && parts_[p].nonZeros() > 0) rhs -= (1.0 - theta) * k_expl[p] * (parts_[p] * u);
    }
    if (weak_ && kappa_e > 0.0) {
      const ComplexVector cross = weak_->cross_terms(constraint_ ? constraint_->prolong(u) : u,
                                                     opts_.direction, g, profile.integral(t1));
      rhs += (1.0 - theta) * kappa_e * cross;
    }

    ca[kM] = 1.0 / k;
    for (int p = kJ; p < kW; ++p) ca[p] = theta * k_impl[p];
    ca[kW] = theta * kappa_e;

    const SparseComplexMatrix* a = nullptr;
    if (direct) {
      auto it = std::find_if(cache.begin(), cache.end(), [&](const CacheEntry& e) { return e.key == ca; });
      if (it == cache.end()) {
        if (cache.size() == kCacheSize) cache.erase(cache.begin());
        cache.emplace_back();
        cache.back().key = ca;
        combined_.combine(ca, cache.back().a);
        cache.back().lu.factorize(cache.back().a);
      } else if (it + 1 != cache.end()) {
        std::rotate(it, it + 1, cache.end());
      }
      a = &cache.back().a;
      u = cache.back().lu.solve(rhs);
    } else {
      combined_.combine(ca, a_iter);
      a = &a_iter;
      gmres(a_iter, rhs, u, cfg.solver);
    }
    if (observer) observer({static_cast<int>(step), t0, t1, a, &rhs, &u});
    if (!u.allFinite()) {
      fail(ErrorKind::kInstability, "non-finite magnetization at step " + std::to_string(step));
    }
  }

  ComplexVector full = constraint_ ? constraint_->prolong(u) : u;
  if (opts_.formulation == Formulation::kTransformed) {
    const double big_f = profile.integral(profile.echo_time());
    if (big_f != 0.0 && g != 0.0) {
      const double scale = kGyromagneticRatio * g * big_f;
      for (int d = 0; d < full.size(); ++d) {
        full[d] *= std::polar(1.0, -scale * opts_.direction.dot(vertex_coords_[d]));
      }
    }
  }
  return full;
}

Complex Simulation::signal(const ComplexVector& state) const {
  if (state.size() != mass_row_sums_.size()) fail(ErrorKind::kDimension, "state has wrong size");
  return mass_row_sums_.cwiseProduct(state).sum();
}

std::vector<SignalRecord> Simulation::run_amplitudes(const TemporalProfile& profile,
                                                     std::span<const double> g, std::span<const double> b,
                                                     const StepperConfig& cfg) const {
  if (g.size() != b.size()) fail(ErrorKind::kDimension, "amplitude and b lists differ in length");
  const std::size_t count = g.size();
  std::vector<Complex> s(count);
  const auto zero_it = std::find(g.begin(), g.end(), 0.0);

  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::size_t i) {
    try {
      s[i] = signal(run(profile, g[i], cfg));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int threads = std::clamp<int>(cfg.threads, 1, static_cast<int>(std::max<std::size_t>(count, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < count; i += threads) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const Complex s0 = zero_it != g.end() ? s[zero_it - g.begin()] : signal(run(profile, 0.0, cfg));
  std::vector<SignalRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].b = b[i];
    out[i].g = g[i];
    out[i].direction = opts_.direction;
    out[i].signal = s[i];
    out[i].attenuation = std::abs(s0) > 0.0 ? std::abs(s[i]) / std::abs(s0) : 0.0;
  }
  return out;
}

}  // namespace btsim
