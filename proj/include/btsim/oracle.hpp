#pragma once

#include "btsim/sequences.hpp"
#include "btsim/stepper.hpp"

#include <complex>
#include <vector>

namespace btsim {

// Reference solutions that share no discretisation code with the FEM path.

/// One homogeneous piece of the interval.
struct FdRegion {
  double length = 0.0;     // µm
  double diffusion = 0.0;  // µm²/µs
  double t2 = 1e16;        // µs
  double initial = 1.0;
};

/// Finite-difference interval problem: regions laid end to end from x0,
/// permeable interfaces between consecutive regions, reflecting ends.
struct FdConfig {
  double x0 = 0.0;
  std::vector<FdRegion> regions;
  std::vector<double> kappa;  // µm/µs, one per interface
  int n = 1000;               // total grid cells, split by region length
  double dt = 100.0;          // µs
  double direction = 1.0;     // gradient component along the interval
};

/// Node-centred second-order differences, Crank-Nicolson in time, ghost-node
/// interface coupling (flux continuity, flux = -κ[[U]]). Signal by trapezoid
/// rule. Throws kInstability when |U| grows beyond 1e3 times its start value.
std::complex<double> fd_signal(const FdConfig& cfg, const TemporalProfile& profile, double g);

/// fd_signal at g, normalised by the g = 0 signal.
SignalRecord fd_reference_signal(const FdConfig& cfg, const TemporalProfile& profile, double g);

/// exp(-b qᵀDq).
double analytic_free_signal(double b, const Mat3& d, const Vec3& q);

/// exp(-T/T2).
double analytic_t2_factor(double echo_time, double t2);

}  // namespace btsim
