#include <kdb/bases.hpp>
#include <kdb/error.hpp>
#include <kdb/lagrange.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace kdb {

double footprint_radius(const GeometrySummary& summary, double kappa) {
  const double h = summary.fill_distance_est;
  if (!(h < 1.0) || !(h > 0.0)) {
    throw DegenerateRadius("footprint radius needs 0 < h < 1, got h = " + std::to_string(h));
  }
  if (!(kappa > 0.0)) throw InvalidArgument("kappa must be positive");
  return kappa * h * std::abs(std::log(h));
}

Footprint footprint(const DataSiteSet& sites, const GeometrySummary& summary, Index i, double kappa) {
  Footprint fp;
  fp.center_index = i;
  fp.radius = footprint_radius(summary, kappa);
  fp.member_indices = neighbors_within(sites, i, fp.radius);
  fp.local_center_position = static_cast<Index>(
      std::lower_bound(fp.member_indices.begin(), fp.member_indices.end(), i) - fp.member_indices.begin());
  return fp;
}

std::vector<Footprint> footprints(const DataSiteSet& sites, const GeometrySummary& summary, double kappa) {
  std::vector<Footprint> out(static_cast<std::size_t>(sites.size()));
  for (Index i = 0; i < sites.size(); ++i) out[static_cast<std::size_t>(i)] = footprint(sites, summary, i, kappa);
  return out;
}

std::vector<Footprint> full_footprints(Index n) {
  IndexList all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Footprint> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& fp = out[static_cast<std::size_t>(i)];
    fp.center_index = i;
    fp.member_indices = all;
    fp.local_center_position = i;
    fp.radius = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<Footprint> singleton_footprints(Index n) {
  std::vector<Footprint> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& fp = out[static_cast<std::size_t>(i)];
    fp.center_index = i;
    fp.member_indices = {i};
  }
  return out;
}

double mean_footprint_size(const std::vector<Footprint>& fps) {
  if (fps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& fp : fps) total += static_cast<double>(fp.size());
  return total / static_cast<double>(fps.size());
}

FootprintMatrices::FootprintMatrices(const KernelSpec& spec, const DataSiteSet& sites, double lambda)
    : spec_(spec), sites_(&sites), lambda_(lambda) {}

FootprintMatrices::FootprintMatrices(const KernelMatrix& full) : full_(&full), lambda_(full.regularization) {}

Index FootprintMatrices::size() const { return full_ ? full_->site_count() : sites_->size(); }

Matrix FootprintMatrices::operator()(const IndexList& members) const {
  const auto m = static_cast<Index>(members.size());
  if (!full_) {
    if (std::is_sorted(members.begin(), members.end())) {
      return assemble_restricted(spec_, *sites_, members, lambda_).entries;
    }
    // Local orders other than ascending are allowed for the order-independent builders.
    Matrix local(m, m);
    for (Index b = 0; b < m; ++b) {
      const auto xb = sites_->point(members[static_cast<std::size_t>(b)]);
      for (Index a = 0; a < m; ++a) {
        const auto xa = sites_->point(members[static_cast<std::size_t>(a)]);
        local(a, b) = a == b ? spec_.diagonal() + lambda_ : spec_.eval((xa - xb).norm());
      }
    }
    return local;
  }
  Matrix local(m, m);
  for (Index b = 0; b < m; ++b) {
    for (Index a = 0; a < m; ++a) {
      local(a, b) = full_->entries(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
    }
  }
  return local;
}

namespace {

SparseMatrix scatter_columns(Index n, const std::vector<Footprint>& fps, const std::vector<Vector>& columns) {
  std::vector<Triplet> triplets;
  std::size_t total = 0;
  for (const auto& c : columns) total += static_cast<std::size_t>(c.size());
  triplets.reserve(total);
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const auto& members = fps[i].member_indices;
    for (Index a = 0; a < columns[i].size(); ++a) {
      triplets.emplace_back(static_cast<int>(members[static_cast<std::size_t>(a)]), static_cast<int>(i), columns[i](a));
    }
  }
  SparseMatrix s(n, static_cast<Index>(fps.size()));
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

}  // namespace

LocalizedBasis cutoff_lagrange(const Matrix& inverse, const std::vector<Footprint>& fps, Index max_sites) {
  const Index n = inverse.rows();
  if (n > max_sites) {
    throw InvalidArgument("cut-off Lagrange basis needs a dense inverse; N = " + std::to_string(n) +
                          " exceeds the limit " + std::to_string(max_sites));
  }
  if (static_cast<Index>(fps.size()) != n) throw InvalidArgument("one footprint per site required");
  std::vector<Vector> columns(fps.size());
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const auto& members = fps[i].member_indices;
    columns[i].resize(static_cast<Index>(members.size()));
    for (std::size_t a = 0; a < members.size(); ++a) {
      columns[i](static_cast<Index>(a)) = inverse(members[a], static_cast<Index>(i));
    }
  }
  LocalizedBasis basis;
  basis.coefficients = scatter_columns(n, fps, columns);
  basis.kind = LocalizedKind::cutoff;
  return basis;
}

LocalizedBasis localized_lagrange(const FootprintMatrices& local, const std::vector<Footprint>& fps) {
  const Index n = local.size();
  if (static_cast<Index>(fps.size()) != n) throw InvalidArgument("one footprint per site required");
  std::vector<Vector> columns(fps.size());
  std::vector<std::string> failures(fps.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const auto& fp = fps[i];
    try {
      Eigen::LLT<Matrix> llt(local(fp.member_indices));
      if (llt.info() != Eigen::Success) {
        failures[i] = "footprint " + std::to_string(i) + " of size " + std::to_string(fp.size()) +
                      " is not positive definite";
        continue;
      }
      Vector e = Vector::Zero(fp.size());
      e(fp.local_center_position) = 1.0;
      columns[i] = llt.solve(e);
    } catch (const Error& e) {
      failures[i] = std::string("footprint ") + std::to_string(i) + ": " + e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw NotPositiveDefinite(f);
  }
  LocalizedBasis basis;
  basis.coefficients = scatter_columns(n, fps, columns);
  basis.kind = LocalizedKind::localized;
  basis.lambda = local.lambda();
  return basis;
}

LocalizedBasis localized_lagrange(const KernelSpec& spec, const DataSiteSet& sites,
                                  const std::vector<Footprint>& fps, double lambda) {
  return localized_lagrange(FootprintMatrices(spec, sites, lambda), fps);
}

Vector quasi_interpolant(const LocalizedBasis& basis, const Vector& data, const KernelSpec& spec,
                         const DataSiteSet& sites, const Matrix& queries) {
  return interpolant(basis.coefficients, data, spec, sites, queries);
}

}  // namespace kdb
