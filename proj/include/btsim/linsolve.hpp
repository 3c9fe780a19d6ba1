#pragma once

#include "btsim/assembly.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <vector>

namespace btsim {

enum class SolverKind { kAuto, kDirect, kIterative };

struct SolverOptions {
  SolverKind kind = SolverKind::kAuto;
  double tolerance = 1e-12;  // relative residual
  int max_iterations = 2000;
  int restart = 60;
  int direct_limit = 50000;  // auto picks the direct solver below this size
};

struct SolveInfo {
  int iterations = 0;
  double residual = 0.0;  // relative
  std::vector<double> history;
};

/// Restarted GMRES with right Jacobi preconditioning. `x` holds the initial
/// guess on entry. Throws kSolverFailure (history in the message) when the
/// relative residual does not reach the tolerance.
SolveInfo gmres(const SparseComplexMatrix& a, const ComplexVector& b, ComplexVector& x,
                const SolverOptions& opts);

/// Sparse LU wrapper; the pattern is analyzed once and reused.
class DirectSolver {
 public:
  void factorize(const SparseComplexMatrix& a);
  ComplexVector solve(const ComplexVector& b) const;

 private:
  using ColMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;
  std::unique_ptr<Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  bool analyzed_ = false;
};

/// One-shot solve with the configured method.
ComplexVector solve_linear(const SparseComplexMatrix& a, const ComplexVector& b,
                           const SolverOptions& opts, SolveInfo* info = nullptr);

bool use_direct(const SolverOptions& opts, int n);

}  // namespace btsim
