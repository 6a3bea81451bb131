#pragma once

#include <kdb/kernels.hpp>
#include <kdb/pointset.hpp>
#include <kdb/types.hpp>

#include <Eigen/SparseCholesky>

#include <filesystem>
#include <memory>
#include <vector>

namespace kdb {

/// Number of monomials of total degree <= q in d variables, binom(q + d, d).
Index moment_count(Index degree, Index dim);

/// Multi-indices of total degree <= q, graded by degree.
std::vector<std::vector<int>> monomial_exponents(Index degree, Index dim);

/// Orthogonal samplet transform T over a cluster tree.
///
/// Every cluster owns an orthogonal two-scale block Q whose input are the
/// scaling distributions of its children (Dirac deltas at a leaf). The first
/// min(m_q, n_in) columns of Q become the cluster's scaling distributions, the
/// rest its samplets, which annihilate all polynomials of degree <= q.
///
/// Rows of T: the root's scaling distributions first, then samplets level by
/// level (coarse to fine), each cluster's samplets contiguous.
class SampletTransform {
 public:
  struct Block {
    Matrix q;           // n_in x n_in, orthogonal
    Index scaling = 0;  // columns kept as scaling distributions
    Index row_offset = 0;  // first row of T holding this cluster's samplets
  };

  struct RowInfo {
    int level = 0;
    Index k = 0;  // index within the level
    Index cluster = 0;
    Index support_size = 0;
    bool scaling = false;
  };

  Index size() const { return static_cast<Index>(tree_.permutation().size()); }
  Index degree() const { return degree_; }
  Index moment_count() const { return moment_count_; }
  const ClusterTree& tree() const { return tree_; }
  const Block& block(Index node) const { return blocks_[static_cast<std::size_t>(node)]; }
  const std::vector<RowInfo>& rows() const { return rows_; }

  /// T v and T^T w by the tree recursion; matrices are transformed column-wise.
  Vector forward(const Vector& v) const;
  Vector inverse(const Vector& w) const;
  Matrix forward_columns(const Matrix& v) const;
  Matrix inverse_columns(const Matrix& w) const;

  /// Dense T (column i = T e_i). Desk scale only.
  Matrix dense() const;

  void write_level_map(const std::filesystem::path& path) const;

 private:
  friend SampletTransform build_transform(const ClusterTree&, const DataSiteSet&, Index);

  ClusterTree tree_;
  Index degree_ = 0;
  Index moment_count_ = 1;
  std::vector<Block> blocks_;
  std::vector<RowInfo> rows_;
};

/// Builds the samplet transform with vanishing moments of order q + 1.
/// Throws RankDeficientMoments when a cluster with at least m_q inputs has a
/// numerically rank-deficient moment matrix.
SampletTransform build_transform(const ClusterTree& tree, const DataSiteSet& sites, Index degree);

/// T M T^T for a dense symmetric M, via the fast transform on both sides.
Matrix samplet_matrix(const SampletTransform& t, const Matrix& m);

enum class ThresholdMode { absolute, relative_frobenius };

/// Thresholded T (A + lambda I) T^T. Off-diagonal entries with magnitude below
/// the threshold are dropped; the diagonal is always kept.
struct CompressedKernelMatrix {
  SparseMatrix s;
  double threshold = 0.0;
  double lambda = 0.0;

  double compression_rate() const;
};

CompressedKernelMatrix compress_kernel_matrix(const SampletTransform& t, const KernelSpec& spec,
                                              const DataSiteSet& sites, double lambda, double threshold,
                                              ThresholdMode mode = ThresholdMode::absolute);

/// Thresholds a symmetric matrix already in samplet coordinates.
CompressedKernelMatrix threshold_samplet_matrix(const Matrix& a_sigma, double lambda, double threshold,
                                                ThresholdMode mode = ThresholdMode::absolute);

/// Same, from an already assembled (regularized) dense kernel matrix.
CompressedKernelMatrix compress_kernel_matrix(const SampletTransform& t, const KernelMatrix& a,
                                              double threshold, ThresholdMode mode = ThresholdMode::absolute);

/// nested_dissection needs a build with CHOLMOD (METIS ordering); see
/// nested_dissection_available().
enum class FillOrdering { nested_dissection, amd, natural };

bool nested_dissection_available();

/// nested_dissection when available, amd otherwise.
FillOrdering default_fill_ordering();

/// Sparse Cholesky of a compressed samplet matrix behind the approximate
/// inverse B = T^T S^{-1} T acting on point-value vectors.
class SampletSolver {
 public:
  SampletSolver(const SampletTransform& t, const CompressedKernelMatrix& s,
                FillOrdering ordering = default_fill_ordering());

  Vector solve(const Vector& rhs) const;
  /// nnz of the Cholesky factor over N^2.
  double factor_compression_rate() const { return factor_rate_; }
  Index factor_nonzeros() const { return factor_nnz_; }

 private:
  const SampletTransform* t_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>> amd_;
  std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>> natural_;
  std::shared_ptr<void> nested_;  // CHOLMOD factor, type hidden from the header
  double factor_rate_ = 0.0;
  Index factor_nnz_ = 0;
};

/// T^T S^{-1} T rhs.
Vector factorize_and_solve(const SampletTransform& t, const CompressedKernelMatrix& s, const Vector& rhs);

/// Embedded samplets psi_{j,k} = sum_i T[(j,k), i] K(., x_i); column r of the
/// result is row r of T embedded, evaluated at the queries.
Matrix embedded_samplet_evaluation(const SampletTransform& t, const KernelSpec& spec, const DataSiteSet& sites,
                                   const Matrix& queries);

/// Dual samplets psi~ = sum [A_Sigma^{-1}] psi with A_Sigma = T (A + lambda I) T^T.
Matrix dual_samplet_evaluation(const SampletTransform& t, const KernelSpec& spec, const DataSiteSet& sites,
                               double lambda, const Matrix& queries);

}  // namespace kdb
