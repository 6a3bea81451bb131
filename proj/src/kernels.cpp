#include <kdb/error.hpp>
#include <kdb/kernels.hpp>

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace kdb {

namespace {

double matern_general(double nu, double r) {
#ifndef KDB_MATERN_GENERAL
  (void)nu;
  (void)r;
  throw UnsupportedSmoothness("general Matern smoothness needs a build with KDB_MATERN_GENERAL");
#else
  if (r == 0.0) return 1.0;
  // K_nu(r) underflows long before r^nu overflows.
  if (r > 700.0) return 0.0;
  const double scale = std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(r));
  return scale * std::cyl_bessel_k(nu, r);
#endif
}

double to_double(std::string_view field, std::string_view what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ConfigError("kernel spec: bad " + std::string(what) + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

bool matern_general_available() {
#ifdef KDB_MATERN_GENERAL
  return true;
#else
  return false;
#endif
}

KernelSpec KernelSpec::matern(double nu, double lengthscale) {
  KernelSpec spec;
  spec.nu = nu;
  spec.lengthscale = lengthscale;
  if (nu == 0.5) {
    spec.family = KernelFamily::matern_half;
  } else if (nu == 1.5) {
    spec.family = KernelFamily::matern_three_half;
  } else if (nu == 2.5) {
    spec.family = KernelFamily::matern_five_half;
  } else {
    spec.family = KernelFamily::matern_general;
  }
  if (!(nu > 0.0)) throw UnsupportedSmoothness("Matern smoothness must be positive");
  if (!(lengthscale > 0.0)) throw InvalidArgument("lengthscale must be positive");
  return spec;
}

KernelSpec KernelSpec::gaussian(double lengthscale) {
  if (!(lengthscale > 0.0)) throw InvalidArgument("lengthscale must be positive");
  KernelSpec spec;
  spec.family = KernelFamily::gaussian;
  spec.nu = 0.0;
  spec.lengthscale = lengthscale;
  return spec;
}

KernelSpec KernelSpec::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 3) throw ConfigError("kernel spec must look like family:nu:delta, got '" + std::string(text) + "'");
  const std::string_view family = parts[0];
  const double nu = to_double(parts[1], "smoothness");
  const double delta = to_double(parts[2], "lengthscale");
  if (family == "gaussian") return gaussian(delta);
  KernelSpec spec;
  if (family == "matern") {
    spec = matern(nu, delta);
  } else if (family == "matern_half") {
    spec = matern(0.5, delta);
  } else if (family == "matern_three_half") {
    spec = matern(1.5, delta);
  } else if (family == "matern_five_half") {
    spec = matern(2.5, delta);
  } else if (family == "matern_general") {
    spec = matern(nu, delta);
    spec.family = KernelFamily::matern_general;
  } else {
    throw ConfigError("unknown kernel family '" + std::string(family) + "'");
  }
  return spec;
}

std::string KernelSpec::to_string() const {
  std::ostringstream out;
  out << (family == KernelFamily::gaussian ? "gaussian" : "matern") << ':' << nu << ':' << lengthscale;
  return out.str();
}

double KernelSpec::eval(double r) const {
  if (r < 0.0) throw InvalidArgument("negative distance");
  const double s = r / lengthscale;
  double value = 0.0;
  switch (family) {
    case KernelFamily::matern_half:
      value = std::exp(-s);
      break;
    case KernelFamily::matern_three_half:
      value = (1.0 + s) * std::exp(-s);
      break;
    case KernelFamily::matern_five_half:
      value = (3.0 + 3.0 * s + s * s) * std::exp(-s);
      if (normalize) value /= 3.0;
      break;
    case KernelFamily::matern_general:
      value = matern_general(nu, s);
      break;
    case KernelFamily::gaussian:
      value = std::exp(-s * s);
      break;
  }
  return amplitude * value;
}

double eval_kernel(const KernelSpec& spec, double r) { return spec.eval(r); }

KernelMatrix assemble(const KernelSpec& spec, const DataSiteSet& sites, double lambda) {
  if (lambda < 0.0) throw InvalidArgument("negative regularization");
  const Index n = sites.size();
  const Matrix& x = sites.points();
  KernelMatrix km;
  km.regularization = lambda;
  km.entries.resize(n, n);
  const double diag = spec.diagonal() + lambda;
#pragma omp parallel for schedule(dynamic, 16)
  for (Index j = 0; j < n; ++j) {
    km.entries(j, j) = diag;
    for (Index i = j + 1; i < n; ++i) {
      const double v = spec.eval((x.col(i) - x.col(j)).norm());
      km.entries(i, j) = v;
    }
  }
  // Mirror after the fact so each entry is computed once.
  km.entries.triangularView<Eigen::StrictlyUpper>() = km.entries.transpose();
  return km;
}

KernelMatrix assemble_restricted(const KernelSpec& spec, const DataSiteSet& sites,
                                 const IndexList& subset, double lambda) {
  if (subset.empty()) throw InvalidSubset("empty index subset");
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] < 0 || subset[k] >= sites.size()) throw InvalidSubset("index out of range");
    if (k > 0 && subset[k] <= subset[k - 1]) throw InvalidSubset("subset must be strictly increasing");
  }
  if (lambda < 0.0) throw InvalidArgument("negative regularization");
  const auto m = static_cast<Index>(subset.size());
  const Matrix& x = sites.points();
  KernelMatrix km;
  km.regularization = lambda;
  km.entries.resize(m, m);
  const double diag = spec.diagonal() + lambda;
  for (Index b = 0; b < m; ++b) {
    km.entries(b, b) = diag;
    const auto jb = subset[static_cast<std::size_t>(b)];
    for (Index a = b + 1; a < m; ++a) {
      const double v = spec.eval((x.col(subset[static_cast<std::size_t>(a)]) - x.col(jb)).norm());
      km.entries(a, b) = v;
      km.entries(b, a) = v;
    }
  }
  return km;
}

Matrix cross_kernel(const KernelSpec& spec, const Matrix& queries, const DataSiteSet& sites) {
  if (queries.rows() != sites.dim()) throw InvalidArgument("query dimension mismatch");
  const Matrix& x = sites.points();
  Matrix out(queries.cols(), sites.size());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < sites.size(); ++j) {
    for (Index q = 0; q < queries.cols(); ++q) out(q, j) = spec.eval((queries.col(q) - x.col(j)).norm());
  }
  return out;
}

}  // namespace kdb
