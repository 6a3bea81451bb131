#include <doctest.h>

#include <kdb/bases.hpp>
#include <kdb/error.hpp>
#include <kdb/lagrange.hpp>
#include <kdb/linalg.hpp>

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace kdb;

namespace {

double spectral_error(const Matrix& a, const SparseMatrix& b) {
  return power_iteration_spectral_error([&](const Vector& x) -> Vector { return a * (b * x) - x; },
                                        [&](const Vector& y) -> Vector { return b.transpose() * (a * y) - y; },
                                        a.rows(), 200);
}

GeometrySummary summary_of(const DataSiteSet& s) { return geometry_summary(s, default_probe_resolution(s.size(), s.dim())); }

}  // namespace

TEST_CASE("footprint extremes") {
  const auto s = generate_uniform(300, 2, 1);
  const auto g = summary_of(s);
  const auto tiny = footprint(s, g, 17, 1e-9);
  CHECK(tiny.member_indices == IndexList{17});
  CHECK(tiny.local_center_position == 0);
  const double huge = 2.0 * s.domain().diameter() / (g.fill_distance_est * std::abs(std::log(g.fill_distance_est)));
  const auto all = footprint(s, g, 17, huge);
  CHECK(all.size() == 300);
  CHECK(all.member_indices[static_cast<std::size_t>(all.local_center_position)] == 17);

  GeometrySummary coarse = g;
  coarse.fill_distance_est = 1.5;
  CHECK_THROWS_AS(footprint_radius(coarse, 1.0), DegenerateRadius);
  CHECK_THROWS_AS(footprint_radius(g, 0.0), InvalidArgument);
}

TEST_CASE("footprint invariants") {
  const auto s = generate_uniform(1000, 2, 2);
  const auto g = summary_of(s);
  const auto fps = footprints(s, g, 1.0);
  const double r = footprint_radius(g, 1.0);
  for (const auto& fp : fps) {
    CHECK(fp.radius == r);
    CHECK(std::is_sorted(fp.member_indices.begin(), fp.member_indices.end()));
    CHECK(fp.member_indices[static_cast<std::size_t>(fp.local_center_position)] == fp.center_index);
  }
}

TEST_CASE("footprint size at N = 100000 and kappa = 0.5 is about 90") {
  const auto s = generate_uniform(100000, 2, 1);
  const auto fps = footprints(s, summary_of(s), 0.5);
  const double mean = mean_footprint_size(fps);
  CAPTURE(mean);
  CHECK(mean >= 0.7 * 90);
  CHECK(mean <= 1.3 * 90);
}

TEST_CASE("footprint cardinality grows slowly with N") {
  const auto a = generate_uniform(2000, 2, 3);
  const auto b = generate_uniform(8000, 2, 3);
  const double ma = mean_footprint_size(footprints(a, summary_of(a), 1.0));
  const double mb = mean_footprint_size(footprints(b, summary_of(b), 1.0));
  CHECK(std::max(ma, mb) / std::min(ma, mb) <= 2.5);
}

TEST_CASE("cut-off Lagrange basis") {
  const auto s = generate_uniform(500, 2, 4);
  const auto a = assemble(KernelSpec::matern(0.5, 0.1), s, 1e-6 * 500);
  const Matrix inv = oracle::inverse(a.entries);
  SUBCASE("full footprints keep the inverse") {
    const auto b = cutoff_lagrange(inv, full_footprints(500));
    CHECK(b.kind == LocalizedKind::cutoff);
    CHECK((Matrix(b.coefficients) - inv).norm() == 0.0);
  }
  SUBCASE("singletons keep the diagonal") {
    const Matrix b = cutoff_lagrange(inv, singleton_footprints(500)).coefficients;
    CHECK((b - Matrix(inv.diagonal().asDiagonal())).norm() == 0.0);
  }
  SUBCASE("error decreases with kappa") {
    const auto g = summary_of(s);
    const double exact = spectral_error(a.entries, inv.sparseView());
    double prev = std::numeric_limits<double>::infinity();
    for (double kappa : {0.5, 1.0, 2.0}) {
      const double err = spectral_error(a.entries, cutoff_lagrange(inv, footprints(s, g, kappa)).coefficients);
      CAPTURE(kappa);
      CHECK(err > exact);
      CHECK(err < prev);
      prev = err;
    }
  }
  CHECK_THROWS_AS(cutoff_lagrange(inv, full_footprints(500), 100), InvalidArgument);
}

TEST_CASE("localized Lagrange limits") {
  const auto s = generate_uniform(300, 2, 5);
  const auto k = KernelSpec::matern(1.5, 0.1);
  const double lambda = 1e-6 * 300;
  const auto a = assemble(k, s, lambda);
  SUBCASE("vacuous localization gives the inverse") {
    const Matrix b = localized_lagrange(k, s, full_footprints(300), lambda).coefficients;
    const Matrix inv = oracle::inverse(a.entries);
    CHECK((b - inv).norm() <= 1e-8 * inv.norm());
  }
  SUBCASE("singletons give the reciprocal diagonal") {
    const auto b = localized_lagrange(k, s, singleton_footprints(300), lambda);
    CHECK(b.coefficients.nonZeros() == 300);
    for (Index i = 0; i < 300; ++i) CHECK(b.coefficients.coeff(i, i) == doctest::Approx(1.0 / (1.0 + lambda)));
  }
  SUBCASE("sliced and evaluated footprint matrices agree") {
    const auto fps = footprints(s, summary_of(s), 1.0);
    const Matrix b1 = localized_lagrange(k, s, fps, lambda).coefficients;
    const Matrix b2 = localized_lagrange(FootprintMatrices(a), fps).coefficients;
    CHECK((b1 - b2).norm() <= 1e-12 * b1.norm());
  }
}

TEST_CASE("localized basis columns stay in their footprints") {
  const auto s = generate_uniform(1000, 2, 6);
  const auto fps = footprints(s, summary_of(s), 1.5);
  const auto b = localized_lagrange(KernelSpec::matern(0.5, 0.1), s, fps, 1e-3);
  Index total = 0;
  for (Index i = 0; i < 1000; ++i) {
    const auto& members = fps[static_cast<std::size_t>(i)].member_indices;
    total += static_cast<Index>(members.size());
    for (SparseMatrix::InnerIterator it(b.coefficients, i); it; ++it) {
      CHECK(std::binary_search(members.begin(), members.end(), static_cast<Index>(it.row())));
    }
  }
  CHECK(b.coefficients.nonZeros() == total);
}

TEST_CASE("localized basis is independent of the local order") {
  const auto s = generate_uniform(200, 2, 7);
  const auto k = KernelSpec::matern(0.5, 0.1);
  auto fps = footprints(s, summary_of(s), 1.5);
  const Matrix b = localized_lagrange(k, s, fps, 1e-3).coefficients;
  std::mt19937_64 gen(1);
  for (auto& fp : fps) {
    std::shuffle(fp.member_indices.begin(), fp.member_indices.end(), gen);
    fp.local_center_position = static_cast<Index>(
        std::find(fp.member_indices.begin(), fp.member_indices.end(), fp.center_index) - fp.member_indices.begin());
  }
  const Matrix shuffled = localized_lagrange(k, s, fps, 1e-3).coefficients;
  CHECK((shuffled - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("spectral error decreases with kappa for every smoothness") {
  const auto s = generate_uniform(1000, 2, 1);
  const auto g = summary_of(s);
  for (double nu : {0.5, 1.0, 1.5}) {
    const auto a = assemble(KernelSpec::matern(nu, 0.1), s, 1e-3);
    const FootprintMatrices local(a);
    double prev = std::numeric_limits<double>::infinity();
    for (double kappa : {0.5, 1.0, 1.5, 2.0, 2.5}) {
      const double err = spectral_error(a.entries, localized_lagrange(local, footprints(s, g, kappa)).coefficients);
      CAPTURE(nu);
      CAPTURE(kappa);
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("quasi-interpolants") {
  const auto k = KernelSpec::matern(0.5, 0.1);
  SUBCASE("full footprints reproduce the interpolant") {
    const auto s = generate_uniform(250, 2, 8);
    const Vector f = oracle::random_vector(250, 1);
    const Matrix q = generate_uniform(40, 2, 9).points();
    const auto basis = localized_lagrange(k, s, full_footprints(250), 0.0);
    const Vector exact = interpolant(lagrange_coefficients(assemble(k, s, 0.0)), f, k, s, q);
    CHECK((quasi_interpolant(basis, f, k, s, q) - exact).cwiseAbs().maxCoeff() <= 1e-8 * exact.cwiseAbs().maxCoeff());
    CHECK(quasi_interpolant(basis, Vector::Zero(250), k, s, q).norm() == 0.0);
  }
  SUBCASE("larger footprints do not worsen a smooth fit") {
    const auto s = generate_uniform(4000, 2, 10);
    const auto g = summary_of(s);
    Vector f(4000);
    for (Index i = 0; i < 4000; ++i) f(i) = std::sin(std::numbers::pi * s.point(i)(0)) * std::sin(std::numbers::pi * s.point(i)(1));
    Matrix q(2, 2500);
    Vector truth(2500);
    for (Index a = 0; a < 50; ++a) {
      for (Index b = 0; b < 50; ++b) {
        q(0, a * 50 + b) = (a + 0.5) / 50.0;
        q(1, a * 50 + b) = (b + 0.5) / 50.0;
        truth(a * 50 + b) = std::sin(std::numbers::pi * q(0, a * 50 + b)) * std::sin(std::numbers::pi * q(1, a * 50 + b));
      }
    }
    const double lambda = 1e-6 * 4000;
    const FootprintMatrices local(k, s, lambda);
    const double e1 = (quasi_interpolant(localized_lagrange(local, footprints(s, g, 1.0)), f, k, s, q) - truth).cwiseAbs().maxCoeff();
    const double e2 = (quasi_interpolant(localized_lagrange(local, footprints(s, g, 2.0)), f, k, s, q) - truth).cwiseAbs().maxCoeff();
    CAPTURE(e1);
    CAPTURE(e2);
    CHECK(e2 <= 1.1 * e1);
  }
}
