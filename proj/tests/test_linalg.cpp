#include <doctest.h>

#include <kdb/error.hpp>
#include <kdb/lagrange.hpp>
#include <kdb/linalg.hpp>

#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace kdb;

namespace {

double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

SparseMatrix random_sparse(Index n, double density, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Triplet> t;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (u(gen) < density) t.emplace_back(static_cast<int>(i), static_cast<int>(j), u(gen) - 0.5);
    }
  }
  SparseMatrix s(n, n);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

}  // namespace

TEST_CASE("Cholesky small cases") {
  Matrix d(2, 2);
  d << 4, 0, 0, 9;
  Matrix l = cholesky(d);
  CHECK(l(0, 0) == 2.0);
  CHECK(l(1, 1) == 3.0);
  CHECK(l(0, 1) == 0.0);

  const double e = std::exp(-1.0);
  Matrix k(2, 2);
  k << 1, e, e, 1;
  l = cholesky(k);
  CHECK(l(0, 0) == doctest::Approx(1.0));
  CHECK(l(1, 0) == doctest::Approx(e));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(1 - e * e)));
  CHECK(l(0, 1) == 0.0);

  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
  CHECK_THROWS_AS(cholesky(Matrix::Ones(2, 3)), InvalidArgument);
}

TEST_CASE("Cholesky and eigen round trips on random SPD matrices") {
  for (Index n : {5, 50, 200, 500}) {
    const Matrix m = oracle::random_spd(n, static_cast<std::uint64_t>(n));
    const Matrix l = cholesky(m);
    CHECK(rel_fro(l * l.transpose(), m) <= 1e-12);
    CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);

    const auto e = sym_eig(m);
    CHECK(rel_fro(e.vectors * e.values.asDiagonal() * e.vectors.transpose(), m) <= 1e-10);
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm() <= 1e-10 * std::sqrt(double(n)));
    for (Index k = 1; k < n; ++k) CHECK(e.values(k) <= e.values(k - 1));
  }
}

TEST_CASE("eigenvalues of simple matrices") {
  const auto id = sym_eig(Matrix::Identity(4, 4));
  CHECK((id.values.array() == 1.0).all());
  Vector d(3);
  d << 1, 2, 3;
  const auto e = sym_eig(d.asDiagonal().toDenseMatrix());
  CHECK(e.values(0) == doctest::Approx(3));
  CHECK(e.values(1) == doctest::Approx(2));
  CHECK(e.values(2) == doctest::Approx(1));
}

TEST_CASE("matrix square root") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  Matrix s = sqrt_spd(d);
  CHECK(s(0, 0) == doctest::Approx(2));
  CHECK(s(1, 1) == doctest::Approx(3));
  CHECK(std::abs(s(0, 1)) <= 1e-15);
  CHECK((sqrt_spd(Matrix::Identity(5, 5)) - Matrix::Identity(5, 5)).norm() <= 1e-14);

  // A footprint of 90 sites from the nu = 1/2 benchmark setting.
  const auto sites = generate_uniform(1000, 2, 1);
  IndexList members(1000);
  std::iota(members.begin(), members.end(), 0);
  std::sort(members.begin(), members.end(), [&](Index i, Index j) {
    return (sites.point(i) - sites.point(0)).norm() < (sites.point(j) - sites.point(0)).norm();
  });
  members.resize(90);
  std::sort(members.begin(), members.end());
  const Matrix m = assemble_restricted(KernelSpec::matern(0.5, 0.1), sites, members, 1e-3).entries;
  s = sqrt_spd(m);
  CHECK(rel_fro(s * s, m) <= 1e-8);
  CHECK(s == s.transpose());
  CHECK(sym_eig(s).values.minCoeff() > 0.0);

  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(sqrt_spd(indefinite), NotPositiveDefinite);
}

TEST_CASE("matrix powers") {
  const Matrix m = oracle::random_spd(30, 9);
  CHECK(rel_fro(spd_power(m, -1.0), oracle::inverse(m)) <= 1e-10);
  CHECK(rel_fro(spd_power(m, 2.0), m * m) <= 1e-10);
  CHECK(rel_fro(spd_power(m, 0.0), Matrix::Identity(30, 30)) <= 1e-12);
}

TEST_CASE("sparse products") {
  SparseMatrix id(4, 4);
  id.setIdentity();
  Vector v(4);
  v << 1, -2, 3, 0.5;
  CHECK(spmv(id, v) == v);

  const SparseMatrix s = random_sparse(100, 0.1, 3);
  const Matrix d = s.toDense();
  const Vector x = oracle::random_vector(100, 4);
  CHECK((spmv(s, x) - oracle::multiply(d, x)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((transpose_spmv(s, x) - oracle::multiply(Matrix(d.transpose()), x)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(compression_rate(s) == doctest::Approx(double(s.nonZeros()) / 1e4));

  // A column without entries contributes nothing; a row without entries yields 0.
  std::vector<Triplet> t{{0, 0, 2.0}, {2, 2, 3.0}};
  SparseMatrix gap(3, 3);
  gap.setFromTriplets(t.begin(), t.end());
  const Vector ones = Vector::Ones(3);
  const Vector y = spmv(gap, ones);
  CHECK(y(1) == 0.0);
  CHECK(y(0) == 2.0);
  CHECK_THROWS_AS(spmv(gap, Vector::Ones(4)), InvalidArgument);
}

TEST_CASE("sparse triangular solves") {
  const Matrix m = oracle::random_spd(60, 10);
  const Matrix l = cholesky(m);
  const SparseMatrix ls = l.sparseView();
  const Vector b = oracle::random_vector(60, 11);
  CHECK((l * sparse_triangular_solve(ls, b, Triangle::lower) - b).norm() <= 1e-10 * b.norm());
  const SparseMatrix us = Matrix(l.transpose()).sparseView();
  CHECK((l.transpose() * sparse_triangular_solve(us, b, Triangle::upper) - b).norm() <= 1e-10 * b.norm());

  SparseMatrix singular = ls;
  singular.coeffRef(7, 7) = 0.0;
  CHECK_THROWS_AS(sparse_triangular_solve(singular, b), SingularDiagonal);
}

TEST_CASE("MatrixMarket round trip") {
  const SparseMatrix s = random_sparse(40, 0.2, 5);
  const auto path = std::filesystem::temp_directory_path() / "kdb_test.mtx";
  write_matrix_market(path, s);
  const SparseMatrix r = read_matrix_market(path);
  CHECK(r.rows() == 40);
  CHECK(r.nonZeros() == s.nonZeros());
  CHECK((r - s).norm() == 0.0);
  CHECK_THROWS_AS(read_matrix_market(path.string() + ".missing"), IoError);
}

TEST_CASE("CG on simple systems") {
  const Vector b = oracle::random_vector(8, 1);
  const LinearOperator id = [](const Vector& x) { return x; };
  const auto r = pcg(id, b, nullptr, 1e-12, 100);
  CHECK(r.report.converged);
  CHECK(r.report.iterations == 1);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 1e4;
  const LinearOperator apply_d = [&](const Vector& x) -> Vector { return d * x; };
  const LinearOperator jacobi = [&](const Vector& x) -> Vector { return d.diagonal().cwiseInverse().cwiseProduct(x); };
  const Vector rhs = Vector::Ones(2);
  const auto plain = pcg(apply_d, rhs, nullptr, 1e-12, 100);
  const auto pre = pcg(apply_d, rhs, jacobi, 1e-12, 100);
  CHECK(plain.report.converged);
  CHECK(pre.report.converged);
  CHECK(pre.report.iterations < plain.report.iterations);

  const auto zero = pcg(apply_d, Vector::Zero(2), nullptr, 1e-9, 10);
  CHECK(zero.report.converged);
  CHECK(zero.solution.norm() == 0.0);
}

TEST_CASE("PCG with identity preconditioner reproduces classical CG") {
  const Matrix a = oracle::random_spd(10, 12, 0.5);
  const Vector b = oracle::random_vector(10, 13);
  const auto xs = oracle::cg_iterates(a, b, 6);
  const LinearOperator apply_a = [&](const Vector& x) -> Vector { return a * x; };
  const LinearOperator id = [](const Vector& x) { return x; };
  for (Index k = 1; k <= 6; ++k) {
    const auto r = pcg(apply_a, b, id, 1e-300, k);
    CHECK(r.report.iterations == k);
    CHECK((r.solution - xs[static_cast<std::size_t>(k - 1)]).norm() <= 1e-12 * xs[static_cast<std::size_t>(k - 1)].norm());
  }
}

TEST_CASE("PCG report contracts") {
  const Matrix a = oracle::random_spd(80, 14, 1e-3);
  const Vector b = oracle::random_vector(80, 15);
  const LinearOperator apply_a = [&](const Vector& x) -> Vector { return a * x; };
  const auto few = pcg(apply_a, b, nullptr, 1e-12, 3);
  CHECK_FALSE(few.report.converged);
  CHECK(few.report.iterations == 3);
  const auto full = pcg(apply_a, b, nullptr, 1e-10, 1000);
  CHECK(full.report.converged);
  CHECK(full.report.final_relative_residual <= 1e-10);
  CHECK((b - a * full.solution).norm() / b.norm() == doctest::Approx(full.report.final_relative_residual));
}

TEST_CASE("GMRES solves a nonsymmetric system") {
  Matrix a = oracle::random_spd(50, 16);
  a(0, 3) += 0.5;
  const Vector b = oracle::random_vector(50, 17);
  const LinearOperator apply_a = [&](const Vector& x) -> Vector { return a * x; };
  const auto r = gmres(apply_a, b, nullptr, 1e-10, 50);
  CHECK(r.report.converged);
  CHECK((a * r.solution - b).norm() <= 1e-9 * b.norm());
  const Matrix inv = oracle::inverse(a);
  const auto pre = gmres(apply_a, b, [&](const Vector& x) -> Vector { return inv * x; }, 1e-10, 50);
  CHECK(pre.report.converged);
  CHECK(pre.report.iterations <= 2);
}

TEST_CASE("power iteration spectral norm") {
  const LinearOperator zero = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  CHECK(power_iteration_spectral_error(zero, zero, 5, 200) == 0.0);

  Vector d(2);
  d << 0.5, 0.1;
  const LinearOperator diag = [&](const Vector& x) -> Vector { return d.cwiseProduct(x); };
  CHECK(std::abs(power_iteration_spectral_error(diag, diag, 2, 200) - 0.5) <= 1e-6);

  // Known SVD U diag(s) V^T with gap s2/s1 = 0.9.
  const Index n = 40;
  const auto q1 = sym_eig(oracle::random_spd(n, 18)).vectors;
  const auto q2 = sym_eig(oracle::random_spd(n, 19)).vectors;
  Vector s(n);
  for (Index k = 0; k < n; ++k) s(k) = k == 0 ? 2.0 : 1.8 * std::pow(0.95, double(k - 1));
  const Matrix e = q1 * s.asDiagonal() * q2.transpose();
  const double est = power_iteration_spectral_error([&](const Vector& x) -> Vector { return e * x; },
                                                    [&](const Vector& x) -> Vector { return e.transpose() * x; }, n,
                                                    200);
  CHECK(std::abs(est - 2.0) / 2.0 <= 1e-4);
  CHECK_THROWS_AS(power_iteration_spectral_error(diag, diag, 2, 0), InvalidArgument);
}

TEST_CASE("footprint inverse at compression rate near 0.218 has error of order 1e-3") {
  const auto sites = generate_uniform(1000, 2, 1);
  const auto g = geometry_summary(sites, default_probe_resolution(1000, 2));
  const auto a = assemble(KernelSpec::matern(0.5, 0.1), sites, 1e-3);
  const auto b = localized_lagrange(FootprintMatrices(a), footprints(sites, g, 1.85)).coefficients;
  const double rate = compression_rate(b);
  CAPTURE(rate);
  CHECK(std::abs(rate - 0.218) <= 0.03);
  const double err = power_iteration_spectral_error(
      [&](const Vector& x) -> Vector { return a.entries * (b * x) - x; },
      [&](const Vector& y) -> Vector { return b.transpose() * (a.entries * y) - y; }, 1000, 200);
  CHECK(err >= 3.6e-4);
  CHECK(err <= 3.6e-2);
}
