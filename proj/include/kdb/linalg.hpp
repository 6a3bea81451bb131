#pragma once

#include <kdb/error.hpp>
#include <kdb/types.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace kdb {

// --- dense -------------------------------------------------------------------

/// Lower-triangular L with L L^T = M. Throws NotPositiveDefinite.
Matrix cholesky(const Matrix& m);

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // orthogonal, columns match values
};

SymmetricEigen sym_eig(const Matrix& m);

/// V diag(w^gamma) V^T for symmetric positive definite M.
Matrix spd_power(const Matrix& m, double gamma);

/// Symmetric S with S S = M.
Matrix sqrt_spd(const Matrix& m);

// --- sparse ------------------------------------------------------------------

/// nnz / (rows * cols).
double compression_rate(const SparseMatrix& s);

Vector spmv(const SparseMatrix& s, const Eigen::Ref<const Vector>& v);
Vector transpose_spmv(const SparseMatrix& s, const Eigen::Ref<const Vector>& v);

enum class Triangle { lower, upper };

/// Solves T x = v for a sparse triangular factor with a full nonzero diagonal.
/// Throws SingularDiagonal on a missing or zero diagonal entry.
Vector sparse_triangular_solve(const SparseMatrix& t, const Eigen::Ref<const Vector>& v,
                               Triangle shape = Triangle::lower);

/// MatrixMarket coordinate real general, 1-based indices.
void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& s);
SparseMatrix read_matrix_market(const std::filesystem::path& path);

// --- iterative ---------------------------------------------------------------

using LinearOperator = std::function<Vector(const Vector&)>;

struct SolveReport {
  Index iterations = 0;
  double final_relative_residual = 0.0;
  double final_absolute_residual = 0.0;
  bool converged = false;
  std::chrono::duration<double> wall_time{0.0};
};

struct SolveResult {
  Vector solution;
  SolveReport report;
};

/// Preconditioned conjugate gradients. Convergence is declared on the true
/// relative residual |rhs - A x| / |rhs| <= tol; the recursive residual only
/// triggers the check. A null preconditioner means the identity.
SolveResult pcg(const LinearOperator& apply_a, const Vector& rhs, const LinearOperator& apply_m,
                double tol, Index max_iter);

/// Right-preconditioned GMRES without restarts (desk-scale reference for the
/// non-symmetric localized Lagrange preconditioner).
SolveResult gmres(const LinearOperator& apply_a, const Vector& rhs, const LinearOperator& right_precond,
                  double tol, Index max_iter);

/// Spectral norm of E estimated by power iteration on E^T E from a fixed-seed
/// random unit start vector. Returns sqrt of the Rayleigh quotient estimate.
double power_iteration_spectral_error(const LinearOperator& apply_e, const LinearOperator& apply_et,
                                      Index n, Index iters, std::uint64_t seed = 0x5eedULL);

}  // namespace kdb
