#pragma once

#include <kdb/kernels.hpp>
#include <kdb/pointset.hpp>
#include <kdb/types.hpp>

#include <vector>

namespace kdb {

/// Sites within radius of x_i, in ascending global order. local_center_position
/// is the position m of i inside member_indices.
struct Footprint {
  Index center_index = 0;
  IndexList member_indices;
  Index local_center_position = 0;
  double radius = 0.0;

  Index size() const { return static_cast<Index>(member_indices.size()); }
};

/// kappa * h * |log h|. Throws DegenerateRadius when h >= 1.
double footprint_radius(const GeometrySummary& summary, double kappa);

Footprint footprint(const DataSiteSet& sites, const GeometrySummary& summary, Index i, double kappa);
std::vector<Footprint> footprints(const DataSiteSet& sites, const GeometrySummary& summary, double kappa);

/// Footprints covering every site (vacuous localization) or only the center.
std::vector<Footprint> full_footprints(Index n);
std::vector<Footprint> singleton_footprints(Index n);

double mean_footprint_size(const std::vector<Footprint>& fps);

/// Source of the regularized footprint matrices (A + lambda I)|_{X_i}: either
/// evaluates the kernel, or slices an already assembled regularized matrix.
/// Keeps a copy of the kernel but references the sites or the full matrix,
/// which must outlive it.
class FootprintMatrices {
 public:
  FootprintMatrices(const KernelSpec& spec, const DataSiteSet& sites, double lambda);
  explicit FootprintMatrices(const KernelMatrix& full);

  Matrix operator()(const IndexList& members) const;
  double lambda() const { return lambda_; }
  Index size() const;

 private:
  KernelSpec spec_;
  const DataSiteSet* sites_ = nullptr;
  const KernelMatrix* full_ = nullptr;
  double lambda_ = 0.0;
};

enum class LocalizedKind { cutoff, localized };

/// Sparse global coefficient matrix B: column i holds the coefficients of the
/// i-th (cut-off or localized) Lagrange function on its footprint.
struct LocalizedBasis {
  SparseMatrix coefficients;
  LocalizedKind kind = LocalizedKind::localized;
  double kappa = 0.0;
  double lambda = 0.0;
};

/// Cut-off Lagrange basis from a dense reference inverse. Refuses N above
/// max_sites since the dense inverse is quadratic in memory.
LocalizedBasis cutoff_lagrange(const Matrix& inverse, const std::vector<Footprint>& fps,
                               Index max_sites = 5000);

/// Localized Lagrange basis: solves (A|_{X_i} + lambda I) beta = e_m per footprint.
LocalizedBasis localized_lagrange(const FootprintMatrices& local, const std::vector<Footprint>& fps);
LocalizedBasis localized_lagrange(const KernelSpec& spec, const DataSiteSet& sites,
                                  const std::vector<Footprint>& fps, double lambda);

/// sum_i f_i chi_i^loc evaluated at the query points.
Vector quasi_interpolant(const LocalizedBasis& basis, const Vector& data, const KernelSpec& spec,
                         const DataSiteSet& sites, const Matrix& queries);

}  // namespace kdb
