#pragma once

#include <kdb/kernels.hpp>
#include <kdb/pointset.hpp>
#include <kdb/types.hpp>

namespace kdb {

/// Dual pair ({phi_i}, {phi~_i}) in the kernel-translate basis: column i of
/// primal_coeffs holds the coefficients of phi_i, column i of dual_coeffs those
/// of phi~_i. primal = A^gamma, dual = A^(-1-gamma), so primal^T A dual = I.
struct DualPair {
  Matrix primal_coeffs;
  Matrix dual_coeffs;
  double gamma = 0.0;
};

DualPair dual_pair(const KernelMatrix& a, double gamma);

/// Columns of (A + lambda I)^(-1): the (modified) Lagrange basis coefficients.
Matrix lagrange_coefficients(const KernelMatrix& a);

/// Upper-triangular C = L^(-T) with A = L L^T. The i-th Newton function
/// k(x) C e_i vanishes at x_1, ..., x_(i-1) and C^T A C = I.
Matrix newton_basis(const KernelMatrix& a);

/// values(q, i) = sum_j coeffs(j, i) K(q, x_j). Queries are columns.
Matrix evaluate_basis(const Matrix& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                      const Matrix& queries);
Matrix evaluate_basis(const SparseMatrix& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                      const Matrix& queries);

/// sum_i f_i b_i(q) for the basis given by `coeffs`, evaluated at queries.
Vector interpolant(const Matrix& coeffs, const Vector& data, const KernelSpec& spec,
                   const DataSiteSet& sites, const Matrix& queries);
Vector interpolant(const SparseMatrix& coeffs, const Vector& data, const KernelSpec& spec,
                   const DataSiteSet& sites, const Matrix& queries);

/// sum_j c_j K(q, x_j) for a coefficient vector in the kernel-translate basis.
Vector evaluate_expansion(const Vector& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                          const Matrix& queries);

}  // namespace kdb
