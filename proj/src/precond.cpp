#include <kdb/bases.hpp>
#include <kdb/error.hpp>
#include <kdb/precond.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <string>

namespace kdb {

namespace {

// Footprints with identical member lists (consecutive runs) share one
// factorization of their local matrix; only the center differs.
template <typename Factorize, typename Column>
SparseMatrix build_factor(const FootprintMatrices& local, const std::vector<Footprint>& fps, Factorize&& factorize,
                          Column&& column) {
  const Index n = local.size();
  if (static_cast<Index>(fps.size()) != n) throw InvalidArgument("one footprint per site required");
  std::vector<std::size_t> run_start;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    if (i == 0 || fps[i].member_indices != fps[i - 1].member_indices) run_start.push_back(i);
  }
  run_start.push_back(fps.size());
  std::vector<Vector> columns(fps.size());
  std::vector<std::string> failures(fps.size());
  const std::size_t runs = run_start.size() - 1;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t r = 0; r < runs; ++r) {
    const std::size_t first = run_start[r];
    try {
      const auto f = factorize(local(fps[first].member_indices));
      for (std::size_t i = first; i < run_start[r + 1]; ++i) columns[i] = column(f, fps[i].local_center_position);
    } catch (const Error& e) {
      failures[first] = "footprint " + std::to_string(first) + " of size " + std::to_string(fps[first].size()) +
                        ": " + e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw NotPositiveDefinite(f);
  }
  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    // Columns may be shorter than the footprint (triangular variant).
    for (Index a = 0; a < columns[i].size(); ++a) {
      triplets.emplace_back(static_cast<int>(fps[i].member_indices[static_cast<std::size_t>(a)]),
                            static_cast<int>(i), columns[i](a));
    }
  }
  SparseMatrix c(n, n);
  c.setFromTriplets(triplets.begin(), triplets.end());
  c.makeCompressed();
  return c;
}

}  // namespace

SymmetricPreconditioner build_sqrt_preconditioner(const FootprintMatrices& local,
                                                  const std::vector<Footprint>& fps) {
  SymmetricPreconditioner p;
  p.variant = PrecondVariant::sqrt;
  p.lambda = local.lambda();
  p.factor = build_factor(
      local, fps,
      [](const Matrix& m) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
        if (eig.info() != Eigen::Success) throw NoConvergence("eigensolver did not converge");
        if (!(eig.eigenvalues().minCoeff() > 0.0)) throw NotPositiveDefinite("non-positive eigenvalue");
        return eig;
      },
      [](const Eigen::SelfAdjointEigenSolver<Matrix>& eig, Index center) -> Vector {
        // M^{-1/2} e_m = V diag(w^{-1/2}) V^T e_m, computed in the eigenbasis.
        const Vector coords = eig.eigenvectors().row(center).transpose().cwiseQuotient(eig.eigenvalues().cwiseSqrt());
        return eig.eigenvectors() * coords;
      });
  return p;
}

SymmetricPreconditioner build_sqrt_preconditioner(const KernelSpec& spec, const DataSiteSet& sites,
                                                  const std::vector<Footprint>& fps, double lambda) {
  return build_sqrt_preconditioner(FootprintMatrices(spec, sites, lambda), fps);
}

SymmetricPreconditioner build_cholesky_preconditioner(const FootprintMatrices& local,
                                                      const std::vector<Footprint>& fps) {
  for (const auto& fp : fps) {
    if (!std::is_sorted(fp.member_indices.begin(), fp.member_indices.end())) {
      throw InvalidArgument("Cholesky preconditioner needs footprints in ascending global order");
    }
  }
  SymmetricPreconditioner p;
  p.variant = PrecondVariant::cholesky;
  p.lambda = local.lambda();
  p.factor = build_factor(
      local, fps,
      [](const Matrix& m) {
        Eigen::LLT<Matrix> llt(m);
        if (llt.info() != Eigen::Success) throw NotPositiveDefinite("Cholesky failed");
        return llt;
      },
      [](const Eigen::LLT<Matrix>& llt, Index center) -> Vector {
        // L^T c = e_m: entries past the center vanish, so only the leading
        // block of L^T is needed.
        const Index k = center + 1;
        Vector c = Vector::Zero(k);
        c(center) = 1.0;
        llt.matrixLLT().topLeftCorner(k, k).triangularView<Eigen::Lower>().transpose().solveInPlace(c);
        return c;
      });
  return p;
}

SymmetricPreconditioner build_cholesky_preconditioner(const KernelSpec& spec, const DataSiteSet& sites,
                                                      const std::vector<Footprint>& fps, double lambda) {
  return build_cholesky_preconditioner(FootprintMatrices(spec, sites, lambda), fps);
}

Vector SymmetricPreconditioner::apply(const Vector& x) const {
  if (x.size() != factor.rows()) throw InvalidArgument("preconditioner: size mismatch");
  const Vector y = factor.transpose() * x;
  return factor * y;
}

LinearOperator SymmetricPreconditioner::as_operator() const {
  return [this](const Vector& x) { return apply(x); };
}

Vector apply(const SymmetricPreconditioner& p, const Vector& x) { return p.apply(x); }

LocalizedNewtonBasis::LocalizedNewtonBasis(const SymmetricPreconditioner& p) : coeffs_(&p.factor) {
  if (p.variant != PrecondVariant::cholesky) throw WrongVariant("localized Newton basis needs the Cholesky variant");
}

Matrix LocalizedNewtonBasis::evaluate(const KernelSpec& spec, const DataSiteSet& sites, const Matrix& queries) const {
  return evaluate_basis(*coeffs_, spec, sites, queries);
}

LocalizedNewtonBasis localized_newton_basis(const SymmetricPreconditioner& p) { return LocalizedNewtonBasis(p); }

}  // namespace kdb
