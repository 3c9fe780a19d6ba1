#include "btsim/linsolve.hpp"

#include "btsim/error.hpp"

#include <cmath>
#include <sstream>

namespace btsim {

bool use_direct(const SolverOptions& opts, int n) {
  switch (opts.kind) {
    case SolverKind::kDirect: return true;
    case SolverKind::kIterative: return false;
    case SolverKind::kAuto: return n < opts.direct_limit;
  }
  return true;
}

namespace {

[[noreturn]] void gmres_failure(const SolveInfo& info, const SolverOptions& opts) {
  std::ostringstream os;
  os.precision(3);
  os << "GMRES did not reach relative residual " << opts.tolerance << " in " << info.iterations
     << " iterations; residual history:";
  const std::size_t stride = std::max<std::size_t>(1, info.history.size() / 20);
  for (std::size_t i = 0; i < info.history.size(); i += stride) os << " " << info.history[i];
  os << " " << info.history.back();
  fail(ErrorKind::kSolverFailure, os.str());
}

}  // namespace

SolveInfo gmres(const SparseComplexMatrix& a, const ComplexVector& b, ComplexVector& x,
                const SolverOptions& opts) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.size() != n) fail(ErrorKind::kDimension, "linear system size mismatch");
  if (x.size() != n) x = ComplexVector::Zero(n);
  SolveInfo info;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    info.history.push_back(0.0);
    return info;
  }
  ComplexVector dinv(n);
  for (int i = 0; i < n; ++i) {
    const Complex d = a.coeff(i, i);
    dinv[i] = std::abs(d) > 0.0 ? 1.0 / d : Complex(1.0);
  }
  const int m = std::max(1, std::min(opts.restart, n));
  Eigen::MatrixXcd v(n, m + 1);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m + 1, m);
  std::vector<Complex> cs(m), sn(m);
  ComplexVector gvec(m + 1);

  ComplexVector r = b - a * x;
  double rel = r.norm() / bnorm;
  info.history.push_back(rel);
  while (rel > opts.tolerance && info.iterations < opts.max_iterations) {
    const double beta = r.norm();
    v.col(0) = r / beta;
    gvec.setZero();
    gvec[0] = beta;
    h.setZero();
    int j = 0;
    for (; j < m && info.iterations < opts.max_iterations; ++j) {
      ++info.iterations;
      ComplexVector w = a * (dinv.cwiseProduct(v.col(j)));
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        h(i, j) = v.col(i).dot(w);
        w -= h(i, j) * v.col(i);
      }
      h(j + 1, j) = w.norm();
      if (std::abs(h(j + 1, j)) > 0.0) v.col(j + 1) = w / h(j + 1, j);
      for (int i = 0; i < j; ++i) {  // apply previous rotations
        const Complex t = std::conj(cs[i]) * h(i, j) + std::conj(sn[i]) * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(std::abs(h(j, j)), std::abs(h(j + 1, j)));
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = h(j, j) / denom;
        sn[j] = h(j + 1, j) / denom;
      }
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      gvec[j + 1] = -sn[j] * gvec[j];
      gvec[j] = std::conj(cs[j]) * gvec[j];
      info.history.push_back(std::abs(gvec[j + 1]) / bnorm);
      if (std::abs(gvec[j + 1]) / bnorm <= opts.tolerance * 0.5) {
        ++j;
        break;
      }
    }
    // Back substitution on the j x j triangle, then x += D⁻¹ V y.
    ComplexVector y = h.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(gvec.head(j));
    x += dinv.cwiseProduct(v.leftCols(j) * y);
    r = b - a * x;
    rel = r.norm() / bnorm;
    info.history.push_back(rel);
  }
  info.residual = rel;
  if (!(rel <= opts.tolerance)) gmres_failure(info, opts);
  return info;
}

void DirectSolver::factorize(const SparseComplexMatrix& a) {
  ColMatrix col = a;
  col.makeCompressed();
  if (!lu_) lu_ = std::make_unique<Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>>();
  if (!analyzed_) {
    lu_->analyzePattern(col);
    analyzed_ = true;
  }
  lu_->factorize(col);
  if (lu_->info() != Eigen::Success) {
    fail(ErrorKind::kSolverFailure, "sparse LU factorization failed: " + lu_->lastErrorMessage());
  }
}

ComplexVector DirectSolver::solve(const ComplexVector& b) const {
  if (!lu_) fail(ErrorKind::kSolverFailure, "direct solver used before factorization");
  ComplexVector x = lu_->solve(b);
  if (lu_->info() != Eigen::Success) fail(ErrorKind::kSolverFailure, "sparse LU solve failed");
  return x;
}

ComplexVector solve_linear(const SparseComplexMatrix& a, const ComplexVector& b,
                           const SolverOptions& opts, SolveInfo* info) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    fail(ErrorKind::kDimension, "linear system size mismatch");
  }
  if (use_direct(opts, static_cast<int>(a.rows()))) {
    DirectSolver lu;
    lu.factorize(a);
    ComplexVector x = lu.solve(b);
    if (info) {
      const double bn = b.norm();
      info->residual = bn > 0 ? (a * x - b).norm() / bn : 0.0;
      info->history = {info->residual};
    }
    return x;
  }
  ComplexVector x = ComplexVector::Zero(b.size());
  SolveInfo local = gmres(a, b, x, opts);
  if (info) *info = std::move(local);
  return x;
}

}  // namespace btsim
