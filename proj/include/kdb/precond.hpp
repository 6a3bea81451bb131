#pragma once

#include <kdb/lagrange.hpp>
#include <kdb/linalg.hpp>
#include <kdb/types.hpp>

#include <vector>

namespace kdb {

enum class PrecondVariant { sqrt, cholesky };

/// Sparse factor C whose columns solve a per-footprint system built from
/// (A + lambda I)|_{X_i}; the preconditioner is C C^T, applied in two sparse
/// products and never assembled.
///
/// sqrt:     (A + lambda I)|_{X_i}^{1/2} c = e_m
/// cholesky: L_i^T c = e_m with (A + lambda I)|_{X_i} = L_i L_i^T
///
/// With footprints in ascending global order the Cholesky variant yields an
/// upper triangular C: the back substitution leaves every entry after the
/// center position zero, and those entries are not stored.
struct SymmetricPreconditioner {
  SparseMatrix factor;
  PrecondVariant variant = PrecondVariant::cholesky;
  double kappa = 0.0;
  double lambda = 0.0;

  Vector apply(const Vector& x) const;
  LinearOperator as_operator() const;
};

SymmetricPreconditioner build_sqrt_preconditioner(const FootprintMatrices& local,
                                                  const std::vector<Footprint>& fps);
SymmetricPreconditioner build_sqrt_preconditioner(const KernelSpec& spec, const DataSiteSet& sites,
                                                  const std::vector<Footprint>& fps, double lambda);

SymmetricPreconditioner build_cholesky_preconditioner(const FootprintMatrices& local,
                                                      const std::vector<Footprint>& fps);
SymmetricPreconditioner build_cholesky_preconditioner(const KernelSpec& spec, const DataSiteSet& sites,
                                                      const std::vector<Footprint>& fps, double lambda);

/// z = C (C^T x).
Vector apply(const SymmetricPreconditioner& p, const Vector& x);

/// Columns of the Cholesky-variant factor read as coefficient vectors of a
/// localized Newton basis in the kernel-translate basis.
class LocalizedNewtonBasis {
 public:
  explicit LocalizedNewtonBasis(const SymmetricPreconditioner& p);

  const SparseMatrix& coefficients() const { return *coeffs_; }
  Matrix evaluate(const KernelSpec& spec, const DataSiteSet& sites, const Matrix& queries) const;

 private:
  const SparseMatrix* coeffs_;
};

LocalizedNewtonBasis localized_newton_basis(const SymmetricPreconditioner& p);

}  // namespace kdb
