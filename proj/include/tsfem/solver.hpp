#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>

#include <Eigen/SparseCholesky>

#include "tsfem/error.hpp"
#include "tsfem/sparse.hpp"

namespace tsfem {

enum class Gauge {
  none,
  /// Semidefinite operators with constants in the kernel: rhs and iterates are
  /// kept orthogonal to the constant vector.
  mean_zero,
};

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 0;  // 0: 20 * dimension
  Gauge gauge = Gauge::none;
};

struct SolveReport {
  Vector x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

namespace detail {

inline void remove_mean(Vector& v) {
  if (v.size() > 0) v.array() -= v.mean();
}

}  // namespace detail

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
inline SolveReport pcg(const SparseOperator& op, Vector rhs, const SolveOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(op.dimension());
  if (rhs.size() != n)
    fail(ErrorKind::input, "rhs size " + std::to_string(rhs.size()) + " does not match operator dimension " +
                               std::to_string(n));
  if (!rhs.allFinite()) fail(ErrorKind::input, "rhs has non-finite entries");
  const bool gauged = options.gauge == Gauge::mean_zero;
  if (gauged) detail::remove_mean(rhs);

  SolveReport report;
  report.x = Vector::Zero(n);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return report;

  const Vector diag = op.diagonal();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(diag[i] > 0.0)) fail(ErrorKind::solver, "operator has a non-positive diagonal entry at row " + std::to_string(i));
  }
  const Vector inv_diag = diag.cwiseInverse();
  const std::size_t cap = options.max_iterations ? options.max_iterations : 20 * static_cast<std::size_t>(n);
  const double target = options.tol * rhs_norm;

  Vector r = rhs;
  Vector z = inv_diag.cwiseProduct(r);
  if (gauged) detail::remove_mean(z);
  Vector p = z;
  double rz = r.dot(z);
  double residual = rhs_norm;
  std::size_t it = 0;
  while (it < cap) {
    const Vector ap = op.apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      if (r.norm() <= target) break;
      fail(ErrorKind::solver, "operator is not positive definite on the search space (p'Ap = " + std::to_string(pap) + ")");
    }
    const double alpha = rz / pap;
    report.x += alpha * p;
    r -= alpha * ap;
    ++it;
    residual = r.norm();
    if (residual <= target) {
      // confirm with the true residual; the recurrence can drift
      Vector true_r = rhs - op.apply(report.x);
      if (gauged) detail::remove_mean(true_r);
      residual = true_r.norm();
      if (residual <= target) break;
      r = true_r;
      z = inv_diag.cwiseProduct(r);
      if (gauged) detail::remove_mean(z);
      p = z;
      rz = r.dot(z);
      continue;
    }
    z = inv_diag.cwiseProduct(r);
    if (gauged) detail::remove_mean(z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  if (gauged) detail::remove_mean(report.x);
  report.iterations = it;
  report.relative_residual = residual / rhs_norm;
  if (!(residual <= target))
    fail(ErrorKind::solver, "conjugate gradients did not converge in " + std::to_string(cap) +
                                " iterations (relative residual " + std::to_string(report.relative_residual) + ")");
  return report;
}

inline Vector solve_spd(const SparseOperator& op, const Vector& rhs, const SolveOptions& options = {}) {
  return pcg(op, rhs, options).x;
}

/// Sparse LDL^T factorisation of a fixed SPD operator, reused for many right
/// hand sides. solve() is const and may be called concurrently.
class FactoredSpd {
 public:
  FactoredSpd() = default;

  explicit FactoredSpd(const SparseOperator& op, double tol = 1e-10)
      : op_(op), tol_(tol) {
    auto ldlt = std::make_shared<Ldlt>();
    ldlt->compute(op_.to_eigen());
    ldlt_ = ldlt;
    if (ldlt_->info() != Eigen::Success) fail(ErrorKind::solver, "factorisation failed: operator is not SPD");
    const Vector d = ldlt_->vectorD();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0)) fail(ErrorKind::solver, "factorisation found a non-positive pivot: operator is not SPD");
    }
  }

  std::size_t dimension() const noexcept { return op_.dimension(); }
  double tolerance() const noexcept { return tol_; }
  const SparseOperator& matrix() const noexcept { return op_; }

  Vector solve(const Eigen::Ref<const Vector>& rhs) const {
    if (!ldlt_ || static_cast<std::size_t>(rhs.size()) != dimension())
      fail(ErrorKind::input, "rhs size does not match factorisation");
    Vector x = ldlt_->solve(rhs);
    const double bound = tol_ * rhs.norm();
    Vector r = rhs - op_.apply(x);
    double residual = r.norm();
    if (residual > bound) {
      x += ldlt_->solve(r);
      residual = (rhs - op_.apply(x)).norm();
    }
    if (!(residual <= bound) && !(residual == 0.0))
      fail(ErrorKind::solver, "factored solve missed the residual tolerance (relative residual " +
                                  std::to_string(residual / rhs.norm()) + ")");
    return x;
  }

 private:
  SparseOperator op_;
  double tol_ = 1e-10;
  using Ldlt = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
  // shared so that copies stay cheap; the factor is never modified after construction
  std::shared_ptr<const Ldlt> ldlt_;
};

/// Solves a cyclic tridiagonal system
///   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]   (indices mod n)
/// by the Thomas algorithm with a Sherman-Morrison correction. Intended for
/// diagonally dominant systems on closed curves (n >= 3).
inline void solve_cyclic_tridiagonal(const Vector& lower, const Vector& diag, const Vector& upper, Vector& x) {
  const Eigen::Index n = diag.size();
  if (n < 3) fail(ErrorKind::solver, "cyclic tridiagonal solve needs at least 3 unknowns");
  const double gamma = -diag[0];
  Vector b = diag;
  b[0] -= gamma;
  b[n - 1] -= upper[n - 1] * lower[0] / gamma;
  Vector u = Vector::Zero(n);
  u[0] = gamma;
  u[n - 1] = upper[n - 1];
  // Thomas on b with sub-diagonal lower[1..n-1] and super-diagonal upper[0..n-2]
  Vector c_prime(n);
  auto thomas = [&](Vector& rhs) {
    c_prime[0] = upper[0] / b[0];
    rhs[0] /= b[0];
    for (Eigen::Index i = 1; i < n; ++i) {
      const double denom = b[i] - lower[i] * c_prime[i - 1];
      c_prime[i] = i < n - 1 ? upper[i] / denom : 0.0;
      rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) rhs[i] -= c_prime[i] * rhs[i + 1];
  };
  thomas(x);
  thomas(u);
  const double v0 = 1.0, vn = lower[0] / gamma;
  const double factor = (v0 * x[0] + vn * x[n - 1]) / (1.0 + v0 * u[0] + vn * u[n - 1]);
  x -= factor * u;
}

}  // namespace tsfem
