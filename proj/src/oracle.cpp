#include "btsim/oracle.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <cmath>

namespace btsim {
namespace {

using C = std::complex<double>;

struct Grid {
  std::vector<double> x, weight, d, t2, h, initial;
  // Off-diagonal couplings of the spatial operator L (tridiagonal).
  std::vector<double> lower, diag, upper;
  std::vector<std::size_t> region_last;  // index of each region's last node
};

Grid build_grid(const FdConfig& cfg) {
  if (cfg.regions.empty()) fail(ErrorKind::kInvalidArgument, "FD problem needs at least one region");
  if (cfg.kappa.size() + 1 != cfg.regions.size()) {
    fail(ErrorKind::kInvalidArgument, "FD problem needs one permeability per interface");
  }
  if (cfg.n < 100) fail(ErrorKind::kInvalidArgument, "FD grid needs at least 100 cells");
  double total = 0.0;
  for (const auto& r : cfg.regions) {
    if (!(r.length > 0.0) || !(r.diffusion > 0.0) || !(r.t2 > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "FD regions need positive length, D and T2");
    }
    total += r.length;
  }
  Grid g;
  double x = cfg.x0;
  for (std::size_t r = 0; r < cfg.regions.size(); ++r) {
    const auto& reg = cfg.regions[r];
    const int cells = std::max(2, static_cast<int>(std::lround(cfg.n * reg.length / total)));
    const double h = reg.length / cells;
    const std::size_t first = g.x.size();
    for (int j = 0; j <= cells; ++j) {
      g.x.push_back(j == cells ? x + reg.length : x + j * h);
      g.weight.push_back(j == 0 || j == cells ? 0.5 * h : h);
      g.d.push_back(reg.diffusion);
      g.t2.push_back(reg.t2);
      g.h.push_back(h);
      g.initial.push_back(reg.initial);
    }
    const std::size_t last = g.x.size() - 1;
    const double a = reg.diffusion / (h * h);
    for (std::size_t j = first; j <= last; ++j) {
      double lo = 0.0, up = 0.0, dg = 0.0;
      if (j == first) {
        up = 2 * a;  // mirror ghost, or interface ghost (κ part added below)
        dg = -2 * a;
      } else if (j == last) {
        lo = 2 * a;
        dg = -2 * a;
      } else {
        lo = a;
        up = a;
        dg = -2 * a;
      }
      g.lower.push_back(lo);
      g.diag.push_back(dg);
      g.upper.push_back(up);
    }
    g.region_last.push_back(last);
    x += reg.length;
  }
  // Interface coupling between the last node of region r and the first node
  // of region r+1 (duplicated positions).
  for (std::size_t r = 0; r + 1 < cfg.regions.size(); ++r) {
    const double k = cfg.kappa[r];
    if (!(k >= 0.0)) fail(ErrorKind::kInvalidArgument, "permeability must be non-negative");
    const std::size_t left = g.region_last[r], right = left + 1;
    g.diag[left] -= 2 * k / g.h[left];
    g.upper[left] += 2 * k / g.h[left];
    g.diag[right] -= 2 * k / g.h[right];
    g.lower[right] += 2 * k / g.h[right];
  }
  return g;
}

// Solves the tridiagonal system (a: sub, b: diag, c: super).
void thomas(std::vector<C>& a, std::vector<C>& b, std::vector<C>& c, std::vector<C>& rhs) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    const C m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - c[i] * rhs[i + 1]) / b[i];
}

}  // namespace

std::complex<double> fd_signal(const FdConfig& cfg, const TemporalProfile& profile, double g) {
  if (!(cfg.dt > 0.0)) fail(ErrorKind::kInvalidArgument, "FD time step must be positive");
  const Grid grid = build_grid(cfg);
  const std::size_t n = grid.x.size();

  // Step ends: multiples of dt with every waveform breakpoint inserted.
  std::vector<double> times = profile.breakpoints();
  const double t_end = profile.echo_time();
  for (long s = 1; s * cfg.dt < t_end; ++s) times.push_back(s * cfg.dt);
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  std::vector<double> ts;
  for (double t : times) {
    if (ts.empty() || t - ts.back() > 1e-9 * t_end) ts.push_back(t);
    else ts.back() = std::max(ts.back(), t);
  }
  ts.front() = 0.0;
  ts.back() = t_end;

  std::vector<C> u(grid.initial.begin(), grid.initial.end());
  double start = 0.0;
  for (const C& v : u) start = std::max(start, std::abs(v));
  const C i(0.0, 1.0);
  std::vector<C> a(n), b(n), c(n), rhs(n);
  for (std::size_t s = 1; s < ts.size(); ++s) {
    const double t0 = ts[s - 1], t1 = ts[s], k = t1 - t0;
    const double f_old = profile.f_right(t0), f_new = profile.f(t1);
    for (std::size_t j = 0; j < n; ++j) {
      const double react = 1.0 / grid.t2[j];
      const C pot_old = i * kGyromagneticRatio * g * cfg.direction * grid.x[j] * f_old + react;
      const C pot_new = i * kGyromagneticRatio * g * cfg.direction * grid.x[j] * f_new + react;
      C lu = grid.diag[j] * u[j] - pot_old * u[j];
      if (j > 0) lu += grid.lower[j] * u[j - 1];
      if (j + 1 < n) lu += grid.upper[j] * u[j + 1];
      rhs[j] = u[j] / k + 0.5 * lu;
      a[j] = -0.5 * grid.lower[j];
      c[j] = -0.5 * grid.upper[j];
      b[j] = 1.0 / k - 0.5 * (grid.diag[j] - pot_new);
    }
    thomas(a, b, c, rhs);
    u.swap(rhs);
    double peak = 0.0;
    for (const C& v : u) peak = std::max(peak, std::abs(v));
    if (!(peak <= 1e3 * std::max(start, 1e-300))) {
      fail(ErrorKind::kInstability, "FD solution grew beyond 1e3x at step " + std::to_string(s));
    }
  }
  C sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += grid.weight[j] * u[j];
  return sum;
}

SignalRecord fd_reference_signal(const FdConfig& cfg, const TemporalProfile& profile, double g) {
  SignalRecord rec;
  rec.g = g;
  rec.b = b_from_g(profile, g);
  rec.direction = Vec3(cfg.direction, 0.0, 0.0);
  rec.signal = fd_signal(cfg, profile, g);
  const C s0 = g == 0.0 ? rec.signal : fd_signal(cfg, profile, 0.0);
  rec.attenuation = std::abs(s0) > 0.0 ? std::abs(rec.signal) / std::abs(s0) : 0.0;
  return rec;
}

double analytic_free_signal(double b, const Mat3& d, const Vec3& q) {
  if (std::abs(q.norm() - 1.0) > 1e-12) fail(ErrorKind::kInvalidArgument, "direction must be a unit vector");
  return std::exp(-b * q.dot(d * q));
}

double analytic_t2_factor(double echo_time, double t2) {
  if (std::isinf(t2)) return 1.0;
  return std::exp(-echo_time / t2);
}

}  // namespace btsim
