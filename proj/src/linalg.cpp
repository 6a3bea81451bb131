#include <kdb/linalg.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace kdb {

Matrix cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("cholesky: matrix is not square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("cholesky: non-positive pivot");
  return llt.matrixL();
}

SymmetricEigen sym_eig(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("sym_eig: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NoConvergence("sym_eig: QR iteration did not converge");
  // Eigen returns ascending order.
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Matrix spd_power(const Matrix& m, double gamma) {
  const SymmetricEigen eig = sym_eig(m);
  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(eig.values(0));
  if (eig.values.size() > 0 && !(eig.values.minCoeff() > tol)) {
    throw NotPositiveDefinite("spd_power: eigenvalue not positive");
  }
  const Vector scaled = eig.values.array().pow(gamma).matrix();
  return eig.vectors * scaled.asDiagonal() * eig.vectors.transpose();
}

Matrix sqrt_spd(const Matrix& m) {
  Matrix s = spd_power(m, 0.5);
  // Exact symmetry; the product above is symmetric only up to rounding.
  s = 0.5 * (s + s.transpose()).eval();
  return s;
}

// --- sparse ------------------------------------------------------------------

double compression_rate(const SparseMatrix& s) {
  if (s.rows() == 0 || s.cols() == 0) return 0.0;
  return static_cast<double>(s.nonZeros()) / (static_cast<double>(s.rows()) * static_cast<double>(s.cols()));
}

Vector spmv(const SparseMatrix& s, const Eigen::Ref<const Vector>& v) {
  if (v.size() != s.cols()) throw InvalidArgument("spmv: size mismatch");
  return s * v;
}

Vector transpose_spmv(const SparseMatrix& s, const Eigen::Ref<const Vector>& v) {
  if (v.size() != s.rows()) throw InvalidArgument("transpose_spmv: size mismatch");
  return s.transpose() * v;
}

Vector sparse_triangular_solve(const SparseMatrix& t, const Eigen::Ref<const Vector>& v, Triangle shape) {
  if (t.rows() != t.cols() || v.size() != t.rows()) throw InvalidArgument("triangular solve: size mismatch");
  for (Index j = 0; j < t.cols(); ++j) {
    if (t.coeff(j, j) == 0.0) throw SingularDiagonal("triangular solve: zero diagonal at " + std::to_string(j));
  }
  Vector x = v;
  if (shape == Triangle::lower) {
    t.triangularView<Eigen::Lower>().solveInPlace(x);
  } else {
    t.triangularView<Eigen::Upper>().solveInPlace(x);
  }
  return x;
}

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << s.rows() << ' ' << s.cols() << ' ' << s.nonZeros() << '\n';
  for (Index j = 0; j < s.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(s, j); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0) {
    throw IoError(path.string() + ": unsupported MatrixMarket header");
  }
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream dims(line);
  Index rows = 0, cols = 0, nnz = 0;
  if (!(dims >> rows >> cols >> nnz)) throw IoError(path.string() + ": bad size line");
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (Index k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw IoError(path.string() + ": truncated entries");
    if (i < 1 || i > rows || j < 1 || j > cols) throw IoError(path.string() + ": index out of range");
    triplets.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
  }
  SparseMatrix s(rows, cols);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

// --- iterative ---------------------------------------------------------------

SolveResult pcg(const LinearOperator& apply_a, const Vector& rhs, const LinearOperator& apply_m,
                double tol, Index max_iter) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  const Index n = rhs.size();
  const double rhs_norm = rhs.norm();
  Vector x = Vector::Zero(n);
  auto finish = [&](double true_res, bool converged) {
    result.solution = std::move(x);
    result.report.final_absolute_residual = true_res;
    result.report.final_relative_residual = rhs_norm > 0.0 ? true_res / rhs_norm : 0.0;
    result.report.converged = converged;
    result.report.wall_time = std::chrono::steady_clock::now() - start;
    return std::move(result);
  };
  if (rhs_norm == 0.0) return finish(0.0, true);

  auto precondition = [&](const Vector& r) { return apply_m ? apply_m(r) : r; };
  Vector r = rhs;
  Vector z = precondition(r);
  Vector p = z;
  double rz = r.dot(z);
  double true_res = rhs_norm;
  for (Index it = 1; it <= max_iter; ++it) {
    const Vector ap = apply_a(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;  // operator or preconditioner not SPD on this Krylov space
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    result.report.iterations = it;
    if (r.norm() <= tol * rhs_norm) {
      // Replace the recursive residual by the true one before declaring success.
      r = rhs - apply_a(x);
      true_res = r.norm();
      if (true_res <= tol * rhs_norm) return finish(true_res, true);
    }
    z = precondition(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  true_res = (rhs - apply_a(x)).norm();
  return finish(true_res, true_res <= tol * rhs_norm);
}

SolveResult gmres(const LinearOperator& apply_a, const Vector& rhs, const LinearOperator& right_precond,
                  double tol, Index max_iter) {
  const auto start = std::chrono::steady_clock::now();
  const Index n = rhs.size();
  const double beta = rhs.norm();
  SolveResult result;
  result.solution = Vector::Zero(n);
  if (beta == 0.0) {
    result.report.converged = true;
    result.report.wall_time = std::chrono::steady_clock::now() - start;
    return result;
  }
  auto precondition = [&](const Vector& v) { return right_precond ? right_precond(v) : v; };
  const Index m = std::min(max_iter, n);
  std::vector<Vector> basis;
  basis.push_back(rhs / beta);
  Matrix h = Matrix::Zero(m + 1, m);
  Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);
  g(0) = beta;
  Index k = 0;
  for (; k < m; ++k) {
    Vector w = apply_a(precondition(basis[static_cast<std::size_t>(k)]));
    for (Index i = 0; i <= k; ++i) {  // modified Gram-Schmidt
      h(i, k) = w.dot(basis[static_cast<std::size_t>(i)]);
      w -= h(i, k) * basis[static_cast<std::size_t>(i)];
    }
    h(k + 1, k) = w.norm();
    for (Index i = 0; i < k; ++i) {
      const double t = cs(i) * h(i, k) + sn(i) * h(i + 1, k);
      h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
      h(i, k) = t;
    }
    const double denom = std::hypot(h(k, k), h(k + 1, k));
    cs(k) = h(k, k) / denom;
    sn(k) = h(k + 1, k) / denom;
    h(k, k) = denom;
    h(k + 1, k) = 0.0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = cs(k) * g(k);
    const bool breakdown = w.norm() <= 1e-300;
    if (!breakdown) basis.push_back(w / w.norm());
    if (std::abs(g(k + 1)) <= tol * beta || breakdown) {
      ++k;
      break;
    }
  }
  if (k > 0) {
    const Vector y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    Vector u = Vector::Zero(n);
    for (Index i = 0; i < k; ++i) u += y(i) * basis[static_cast<std::size_t>(i)];
    result.solution = precondition(u);
  }
  const double true_res = (rhs - apply_a(result.solution)).norm();
  result.report.iterations = k;
  result.report.final_absolute_residual = true_res;
  result.report.final_relative_residual = true_res / beta;
  result.report.converged = true_res <= tol * beta;
  result.report.wall_time = std::chrono::steady_clock::now() - start;
  return result;
}

double power_iteration_spectral_error(const LinearOperator& apply_e, const LinearOperator& apply_et,
                                      Index n, Index iters, std::uint64_t seed) {
  if (iters < 1) throw InvalidArgument("power iteration needs at least one step");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(gen);
  v.normalize();
  double estimate = 0.0;
  for (Index it = 0; it < iters; ++it) {
    const Vector w = apply_et(apply_e(v));
    // Rayleigh quotient v^T E^T E v for the unit vector v.
    estimate = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  return std::sqrt(std::max(estimate, 0.0));
}

}  // namespace kdb
