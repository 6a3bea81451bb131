#pragma once

#include <kdb/pointset.hpp>
#include <kdb/types.hpp>

#include <string>
#include <string_view>

namespace kdb {

enum class KernelFamily { matern_half, matern_three_half, matern_five_half, matern_general, gaussian };

/// Radial kernel K(x, y) = amplitude * phi(|x - y| / lengthscale).
///
/// Matern profiles follow phi_nu(r) = 2^(1-nu)/Gamma(nu) r^nu K_nu(r), so that
/// nu = 1/2, 3/2, 5/2 give exp(-r), (1+r)exp(-r) and (3+3r+r^2)exp(-r)/3. With
/// normalize = false the raw closed form (3+3r+r^2)exp(-r) is used for nu = 5/2;
/// the other closed forms already satisfy phi(0) = 1.
struct KernelSpec {
  KernelFamily family = KernelFamily::matern_half;
  double nu = 0.5;
  double lengthscale = 1.0;
  double amplitude = 1.0;
  bool normalize = true;

  static KernelSpec matern(double nu, double lengthscale);
  static KernelSpec gaussian(double lengthscale);

  /// Parses "family:nu:delta", e.g. "matern:0.5:0.1" or "gaussian:0:0.2".
  /// Recognized families: matern, matern_half, matern_three_half,
  /// matern_five_half, matern_general, gaussian.
  static KernelSpec parse(std::string_view text);
  std::string to_string() const;

  /// Value at distance zero (the diagonal of the kernel matrix without ridge).
  double diagonal() const { return eval(0.0); }
  double eval(double r) const;
};

double eval_kernel(const KernelSpec& spec, double r);

/// Whether arbitrary Matern smoothness (modified Bessel K) is compiled in.
/// Without it only nu = 1/2, 3/2, 5/2 evaluate; others throw UnsupportedSmoothness.
bool matern_general_available();

/// Dense symmetric matrix [K(x_i, x_j)] + lambda I.
struct KernelMatrix {
  Matrix entries;
  double regularization = 0.0;

  Index site_count() const { return entries.rows(); }
};

KernelMatrix assemble(const KernelSpec& spec, const DataSiteSet& sites, double lambda);

/// Principal submatrix on a strictly increasing index subset.
KernelMatrix assemble_restricted(const KernelSpec& spec, const DataSiteSet& sites,
                                 const IndexList& subset, double lambda);

/// Rectangular block [K(q_a, x_j)] for query points q (columns of `queries`).
Matrix cross_kernel(const KernelSpec& spec, const Matrix& queries, const DataSiteSet& sites);

}  // namespace kdb
