#include <kdb/bases.hpp>
#include <kdb/error.hpp>
#include <kdb/linalg.hpp>

#include <Eigen/Cholesky>

namespace kdb {

DualPair dual_pair(const KernelMatrix& a, double gamma) {
  const SymmetricEigen eig = sym_eig(a.entries);
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(eig.values(0));
  if (!(eig.values.minCoeff() > tol)) throw NotPositiveDefinite("dual_pair: kernel matrix is not positive definite");
  const auto& v = eig.vectors;
  DualPair pair;
  pair.gamma = gamma;
  pair.primal_coeffs = v * eig.values.array().pow(gamma).matrix().asDiagonal() * v.transpose();
  pair.dual_coeffs = v * eig.values.array().pow(-1.0 - gamma).matrix().asDiagonal() * v.transpose();
  return pair;
}

Matrix lagrange_coefficients(const KernelMatrix& a) {
  Eigen::LLT<Matrix> llt(a.entries);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("lagrange_coefficients: Cholesky failed");
  Matrix inv = llt.solve(Matrix::Identity(a.site_count(), a.site_count()));
  return inv;
}

Matrix newton_basis(const KernelMatrix& a) {
  const Matrix l = cholesky(a.entries);
  const Index n = l.rows();
  Matrix c = Matrix::Identity(n, n);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(c);
  c.triangularView<Eigen::StrictlyLower>().setZero();
  return c;
}

Matrix evaluate_basis(const Matrix& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                      const Matrix& queries) {
  if (coeffs.rows() != sites.size()) throw InvalidArgument("evaluate_basis: coefficient rows must equal N");
  return cross_kernel(spec, queries, sites) * coeffs;
}

Matrix evaluate_basis(const SparseMatrix& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                      const Matrix& queries) {
  if (coeffs.rows() != sites.size()) throw InvalidArgument("evaluate_basis: coefficient rows must equal N");
  return cross_kernel(spec, queries, sites) * coeffs;
}

Vector evaluate_expansion(const Vector& coeffs, const KernelSpec& spec, const DataSiteSet& sites,
                          const Matrix& queries) {
  if (coeffs.size() != sites.size()) throw InvalidArgument("evaluate_expansion: coefficient length must equal N");
  if (queries.rows() != sites.dim()) throw InvalidArgument("query dimension mismatch");
  const Matrix& x = sites.points();
  Vector out(queries.cols());
#pragma omp parallel for schedule(static)
  for (Index q = 0; q < queries.cols(); ++q) {
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (coeffs(j) != 0.0) s += coeffs(j) * spec.eval((queries.col(q) - x.col(j)).norm());
    }
    out(q) = s;
  }
  return out;
}

Vector interpolant(const Matrix& coeffs, const Vector& data, const KernelSpec& spec,
                   const DataSiteSet& sites, const Matrix& queries) {
  if (data.size() != coeffs.cols()) throw InvalidArgument("interpolant: data length mismatch");
  return evaluate_expansion(coeffs * data, spec, sites, queries);
}

Vector interpolant(const SparseMatrix& coeffs, const Vector& data, const KernelSpec& spec,
                   const DataSiteSet& sites, const Matrix& queries) {
  if (data.size() != coeffs.cols()) throw InvalidArgument("interpolant: data length mismatch");
  return evaluate_expansion(coeffs * data, spec, sites, queries);
}

}  // namespace kdb
