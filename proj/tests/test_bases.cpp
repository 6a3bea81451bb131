#include <doctest.h>

#include <kdb/bases.hpp>
#include <kdb/error.hpp>
#include <kdb/linalg.hpp>

#include "oracles.hpp"

#include <cmath>

using namespace kdb;

namespace {

KernelSpec h1_kernel() {
  KernelSpec k = KernelSpec::matern(0.5, 1.0);
  k.amplitude = 0.5;
  return k;
}

KernelMatrix matrix_of(Matrix m) { return KernelMatrix{std::move(m), 0.0}; }

}  // namespace

TEST_CASE("gamma = 0 gives kernel translates and the Lagrange basis") {
  const auto s = generate_uniform(120, 2, 1);
  const auto a = assemble(KernelSpec::matern(1.5, 0.1), s, 1e-4);
  const auto p = dual_pair(a, 0.0);
  CHECK((p.primal_coeffs - Matrix::Identity(120, 120)).norm() <= 1e-10);
  const Matrix inv = oracle::inverse(a.entries);
  CHECK((p.dual_coeffs - inv).norm() <= 1e-8 * inv.norm());
}

TEST_CASE("gamma = -1/2 gives a self-dual orthonormal basis") {
  const auto s = generate_uniform(100, 2, 2);
  const auto a = assemble(KernelSpec::matern(0.5, 0.1), s, 1e-3);
  const auto p = dual_pair(a, -0.5);
  CHECK((p.primal_coeffs - p.dual_coeffs).norm() <= 1e-10 * p.primal_coeffs.norm());
  CHECK((p.primal_coeffs.transpose() * a.entries * p.primal_coeffs - Matrix::Identity(100, 100)).norm() <= 1e-8);
}

TEST_CASE("1x1 dual pair") {
  Matrix m(1, 1);
  m << 4.0;
  const auto p = dual_pair(matrix_of(m), 1.0);
  CHECK(p.primal_coeffs(0, 0) == doctest::Approx(4.0));
  CHECK(p.dual_coeffs(0, 0) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("duality holds for several gammas") {
  const auto s = generate_uniform(300, 2, 3);
  const auto a = assemble(KernelSpec::matern(0.5, 0.1), s, 1e-6 * 300);
  for (double gamma : {-1.0, -0.5, 0.0, 0.5}) {
    const auto p = dual_pair(a, gamma);
    CAPTURE(gamma);
    CHECK((p.primal_coeffs.transpose() * a.entries * p.dual_coeffs - Matrix::Identity(300, 300)).norm() <= 1e-6);
  }
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(dual_pair(matrix_of(indefinite), 0.0), NotPositiveDefinite);
}

TEST_CASE("Lagrange coefficients") {
  CHECK(lagrange_coefficients(matrix_of(Matrix::Identity(3, 3))) == Matrix::Identity(3, 3));
  const double a = 0.3;
  Matrix m(2, 2);
  m << 1, a, a, 1;
  Matrix expect(2, 2);
  expect << 1, -a, -a, 1;
  expect /= (1 - a * a);
  CHECK((lagrange_coefficients(matrix_of(m)) - expect).norm() <= 1e-14);
}

TEST_CASE("Lagrange property on 200 equidistant sites") {
  const auto s = equidistant_1d(200, -1.0, 1.0);
  const auto k = h1_kernel();
  const auto a = assemble(k, s, 0.0);
  const Matrix chi = evaluate_basis(lagrange_coefficients(a), k, s, s.points());
  CHECK((chi - Matrix::Identity(200, 200)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("basis evaluation") {
  const auto s = generate_uniform(40, 2, 4);
  const auto k = KernelSpec::matern(1.5, 0.2);
  const Matrix q = generate_uniform(9, 2, 5).points();
  CHECK((evaluate_basis(Matrix::Identity(40, 40), k, s, q) - cross_kernel(k, q, s)).norm() == 0.0);
  SparseMatrix sparse_id(40, 40);
  sparse_id.setIdentity();
  CHECK((evaluate_basis(sparse_id, k, s, q) - cross_kernel(k, q, s)).norm() == 0.0);

  const auto one = generate_uniform(1, 2, 6);
  Matrix c(1, 1);
  c << 1.0 / k.diagonal();
  CHECK(evaluate_basis(c, k, one, one.points())(0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(evaluate_basis(Matrix::Identity(3, 3), k, s, q), InvalidArgument);
}

TEST_CASE("Newton basis") {
  const auto k = KernelSpec::matern(0.5, 0.3);
  SUBCASE("single site") {
    const auto s = generate_uniform(1, 2, 1);
    const auto a = assemble(k, s, 0.25);
    const Matrix c = newton_basis(a);
    CHECK(c(0, 0) == doctest::Approx(1.0 / std::sqrt(1.25)));
    CHECK((c.transpose() * a.entries * c)(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("zeros at preceding sites") {
    const auto s = generate_uniform(3, 2, 7);
    const auto a = assemble(k, s, 0.0);
    const Matrix values = evaluate_basis(newton_basis(a), k, s, s.points());  // values(q, i)
    CHECK(std::abs(values(0, 1)) <= 1e-8);
    CHECK(std::abs(values(0, 2)) <= 1e-8);
    CHECK(std::abs(values(1, 2)) <= 1e-8);
    CHECK(std::abs(values(2, 2)) > 1e-3);
  }
  SUBCASE("orthonormal and upper triangular") {
    const auto s = generate_uniform(150, 2, 8);
    const auto a = assemble(k, s, 1e-4);
    const Matrix c = newton_basis(a);
    CHECK((c.transpose() * a.entries * c - Matrix::Identity(150, 150)).norm() <= 1e-8);
    CHECK(c.triangularView<Eigen::StrictlyLower>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);
    const Matrix values = evaluate_basis(c, k, s, s.points());
    double worst = 0.0;
    for (Index i = 0; i < 150; ++i) {
      for (Index j = 0; j < i; ++j) worst = std::max(worst, std::abs(values(j, i)));
    }
    // Regularized: zeros hold for A + lambda I, so evaluation with K alone is off by lambda * c.
    CHECK(worst <= 1e-4 * c.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("interpolants") {
  const auto s = generate_uniform(200, 2, 9);
  const auto k = KernelSpec::matern(0.5, 0.1);
  const auto a = assemble(k, s, 0.0);
  const Matrix lagrange = lagrange_coefficients(a);
  const Matrix q = generate_uniform(50, 2, 10).points();

  SUBCASE("functions in the span are reproduced") {
    const Vector f = a.entries.col(0);
    const Vector got = interpolant(lagrange, f, k, s, q);
    const Vector expect = cross_kernel(k, q, s).col(0);
    CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("constant data at the sites") {
    const Vector got = interpolant(lagrange, Vector::Ones(200), k, s, s.points());
    CHECK((got.array() - 1.0).abs().maxCoeff() <= 1e-8);
  }
  SUBCASE("heavy regularization shrinks the fit") {
    const Vector f = Vector::Ones(200);
    const Matrix heavy = lagrange_coefficients(assemble(k, s, 1e3 * 200));
    CHECK(interpolant(heavy, f, k, s, s.points()).norm() < interpolant(lagrange, f, k, s, s.points()).norm());
  }
  SUBCASE("sparse coefficients agree with dense") {
    const SparseMatrix sp = lagrange.sparseView();
    const Vector f = oracle::random_vector(200, 3);
    CHECK((interpolant(sp, f, k, s, q) - interpolant(lagrange, f, k, s, q)).norm() <= 1e-10);
  }
}

TEST_CASE("inverse kernel entries decay with distance") {
  const auto s = generate_uniform(2000, 2, 1);
  const auto g = geometry_summary(s, default_probe_resolution(2000, 2));
  const auto a = assemble(KernelSpec::matern(0.5, 0.1), s, 1e-6 * 2000);
  const Matrix inv = lagrange_coefficients(a);
  std::vector<double> dist, logmag;
  for (Index j = 0; j < 2000; ++j) {
    for (Index k = j + 1; k < 2000; ++k) {
      const double d = (s.point(j) - s.point(k)).norm();
      if (d <= 10.0 * g.fill_distance_est && inv(j, k) != 0.0) {
        dist.push_back(d);
        logmag.push_back(std::log(std::abs(inv(j, k))));
      }
    }
  }
  CHECK(oracle::pearson(dist, logmag) <= -0.5);
}
