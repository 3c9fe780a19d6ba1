#pragma once

#include "btsim/assembly.hpp"
#include "btsim/linsolve.hpp"
#include "btsim/periodic.hpp"
#include "btsim/sequences.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace btsim {

enum class BoundaryMode { kNeumann, kPeriodicStrong, kPeriodicWeak };

/// Fixed linear combination Σ c_k X_k of matrices sharing one union pattern,
/// so forming A each step is a pass over the value arrays only.
class CombinedOperator {
 public:
  CombinedOperator() = default;
  explicit CombinedOperator(std::vector<const SparseComplexMatrix*> parts);

  std::size_t num_parts() const { return values_.size(); }
  /// Writes Σ c_k X_k into `out` (pattern preserved, so LU analysis can be reused).
  void combine(std::span<const Complex> coeffs, SparseComplexMatrix& out) const;
  const SparseComplexMatrix& pattern() const { return pattern_; }

 private:
  SparseComplexMatrix pattern_;
  std::vector<std::vector<Complex>> values_;
};

/// Step end points on [0, T]: a uniform grid of width dt with the waveform
/// breakpoints inserted, so no step straddles a jump in f.
std::vector<double> time_grid(const TemporalProfile& profile, double dt);

struct StepperConfig {
  double theta = 0.5;
  double dt = 200.0;  // µs
  SolverOptions solver;
  int threads = 1;    // b-values run concurrently when > 1
};

/// One step's matrices, handed to an observer for structural checks.
struct StepView {
  int step = 0;
  double t_prev = 0.0, t = 0.0;
  const SparseComplexMatrix* a = nullptr;
  const ComplexVector* rhs = nullptr;
  const ComplexVector* u = nullptr;  // solution after the step (reduced on the strong path)
};
using StepObserver = std::function<void(const StepView&)>;

struct SignalRecord {
  double b = 0.0;  // s/mm² (= µs/µm²)
  double g = 0.0;  // T/µm
  Vec3 direction = Vec3::UnitX();
  Complex signal;
  double attenuation = 0.0;
};

/// Everything the time loop needs besides the waveform and the amplitude.
/// Built once per (mesh, direction) and shared read-only across b-values.
class Simulation {
 public:
  struct Options {
    BoundaryMode boundary = BoundaryMode::kNeumann;
    Formulation formulation = Formulation::kDirect;
    double kappa = 0.0;  // µm/µs
    Vec3 direction = Vec3::UnitX();
    AssemblyOptions assembly;
  };

  /// `initial` holds one value per cell (the compartment's initial
  /// magnetization); nodal values take the first incident cell of the field.
  Simulation(const Mesh& mesh, std::span<const std::uint8_t> phase, const CellCoefficients& coeffs,
             std::span<const double> initial, const Options& opts);

  const FemSystem& system() const { return system_; }
  const DofLayout& layout() const { return system_.layout; }
  const Options& options() const { return opts_; }
  const std::optional<PeriodicConstraint>& constraint() const { return constraint_; }
  const std::optional<WeakPeriodicData>& weak() const { return weak_; }

  /// Initial nodal vector in the full dof numbering.
  const ComplexVector& initial_state() const { return initial_; }

  /// March from 0 to T at amplitude g and return the final full-dof state
  /// (already converted back to the untransformed magnetization).
  ComplexVector run(const TemporalProfile& profile, double g, const StepperConfig& cfg,
                    const StepObserver& observer = {}) const;

  /// ∫ U over the domain (both fields) for a full-dof state.
  Complex signal(const ComplexVector& state) const;

  /// Signal at g, plus S₀ (g = 0), for each amplitude; records are returned
  /// in input order.
  std::vector<SignalRecord> run_amplitudes(const TemporalProfile& profile, std::span<const double> g,
                                           std::span<const double> b, const StepperConfig& cfg) const;

 private:
  void step_coefficients(double f, double big_f, double g, std::vector<Complex>& k) const;

  Options opts_;
  FemSystem system_;
  std::vector<Vec3> vertex_coords_;  // per full dof
  ComplexVector initial_;
  ComplexVector mass_row_sums_;       // Mᵀ1 in the full numbering
  std::optional<PeriodicConstraint> constraint_;
  std::optional<WeakPeriodicData> weak_;
  // Reduced (or full) constituents in the order used by step_coefficients,
  // followed by the weak own-side mass when present.
  std::vector<SparseComplexMatrix> parts_;
  SparseComplexMatrix mass_;
  CombinedOperator combined_;
};

}  // namespace btsim
