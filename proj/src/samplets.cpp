#include <kdb/error.hpp>
#include <kdb/linalg.hpp>
#include <kdb/samplets.hpp>

#ifdef KDB_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace kdb {

Index moment_count(Index degree, Index dim) {
  // binom(q + d, d)
  double c = 1.0;
  for (Index k = 1; k <= dim; ++k) c = c * static_cast<double>(degree + k) / static_cast<double>(k);
  return static_cast<Index>(std::llround(c));
}

std::vector<std::vector<int>> monomial_exponents(Index degree, Index dim) {
  std::vector<std::vector<int>> out;
  std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
  for (int total = 0; total <= degree; ++total) {
    // All alpha with |alpha| = total, first coordinate varying slowest.
    auto rec = [&](auto&& self, std::size_t axis, int remaining) -> void {
      if (axis + 1 == alpha.size()) {
        alpha[axis] = remaining;
        out.push_back(alpha);
        return;
      }
      for (int a = remaining; a >= 0; --a) {
        alpha[axis] = a;
        self(self, axis + 1, remaining - a);
      }
    };
    rec(rec, 0, total);
  }
  return out;
}

namespace {

// Monomials in coordinates centered at the cluster box midpoint and scaled by
// its largest half-width: rows = exponents, columns = sites of the cluster.
Matrix local_monomials(const std::vector<std::vector<int>>& exps, const DataSiteSet& sites,
                       const IndexList& members, const Box& box) {
  const Vector c = box.center();
  double s = 0.5 * box.extent().maxCoeff();
  if (!(s > 0.0)) s = 1.0;
  const Index dim = sites.dim();
  Matrix p(static_cast<Index>(exps.size()), static_cast<Index>(members.size()));
  for (std::size_t j = 0; j < members.size(); ++j) {
    const Vector t = (sites.point(members[j]) - c) / s;
    for (std::size_t a = 0; a < exps.size(); ++a) {
      double v = 1.0;
      for (Index k = 0; k < dim; ++k) v *= std::pow(t(k), exps[a][static_cast<std::size_t>(k)]);
      p(static_cast<Index>(a), static_cast<Index>(j)) = v;
    }
  }
  return p;
}

}  // namespace

SampletTransform build_transform(const ClusterTree& tree, const DataSiteSet& sites, Index degree) {
  if (degree < 0) throw InvalidArgument("polynomial degree must be non-negative");
  if (static_cast<Index>(tree.permutation().size()) != sites.size()) {
    throw InvalidArgument("cluster tree does not match the site set");
  }
  SampletTransform t;
  t.tree_ = tree;
  t.degree_ = degree;
  t.moment_count_ = moment_count(degree, sites.dim());
  const auto exps = monomial_exponents(degree, sites.dim());
  const Index mq = t.moment_count_;
  const auto& nodes = tree.nodes();
  t.blocks_.resize(nodes.size());

  // Scaling distributions of each processed cluster as coefficient vectors over
  // the cluster's sites (tree order); released once the parent consumed them.
  std::vector<Matrix> scaling(nodes.size());

  // Preorder storage: children have larger ids than their parent.
  for (std::size_t id = nodes.size(); id-- > 0;) {
    const ClusterNode& node = nodes[id];
    Matrix phi_in;
    if (node.is_leaf()) {
      phi_in = Matrix::Identity(node.size(), node.size());
    } else {
      Index cols = 0;
      for (Index c : node.children) cols += scaling[static_cast<std::size_t>(c)].cols();
      phi_in = Matrix::Zero(node.size(), cols);
      Index col = 0;
      for (Index c : node.children) {
        const auto& child = nodes[static_cast<std::size_t>(c)];
        auto& sc = scaling[static_cast<std::size_t>(c)];
        phi_in.block(child.begin - node.begin, col, sc.rows(), sc.cols()) = sc;
        col += sc.cols();
        sc.resize(0, 0);
      }
    }
    const Index n_in = phi_in.cols();
    auto& block = t.blocks_[id];
    if (n_in <= mq) {
      // Too few inputs to carry any vanishing moments: all stay scaling.
      block.q = Matrix::Identity(n_in, n_in);
      block.scaling = n_in;
    } else {
      const Matrix moments = local_monomials(exps, sites, tree.indices(static_cast<Index>(id)), node.box) * phi_in;
      Eigen::HouseholderQR<Matrix> qr(moments.transpose());
      const Matrix r = qr.matrixQR().topRows(mq).triangularView<Eigen::Upper>();
      const double rmax = r.diagonal().cwiseAbs().maxCoeff();
      const double rmin = r.diagonal().cwiseAbs().minCoeff();
      if (!(rmin > 1e-12 * rmax)) {
        throw RankDeficientMoments("cluster " + std::to_string(id) + " (" + std::to_string(node.size()) +
                                   " sites) has a rank-deficient moment matrix");
      }
      block.q = qr.householderQ() * Matrix::Identity(n_in, n_in);
      // Largest-magnitude entry of every column positive.
      for (Index c = 0; c < n_in; ++c) {
        Index arg = 0;
        block.q.col(c).cwiseAbs().maxCoeff(&arg);
        if (block.q(arg, c) < 0.0) block.q.col(c) *= -1.0;
      }
      block.scaling = mq;
    }
    scaling[id] = phi_in * block.q.leftCols(block.scaling);
  }

  // Row bookkeeping: root scaling first, then samplets by level.
  const auto& root_block = t.blocks_.front();
  Index row = 0;
  for (Index k = 0; k < root_block.scaling; ++k) {
    t.rows_.push_back({0, k, 0, nodes.front().size(), true});
    ++row;
  }
  const int depth = tree.depth();
  for (int level = 0; level <= depth; ++level) {
    Index k = 0;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      if (nodes[id].level != level) continue;
      auto& block = t.blocks_[id];
      block.row_offset = row;
      for (Index s = block.scaling; s < block.q.cols(); ++s) {
        t.rows_.push_back({level, k++, static_cast<Index>(id), nodes[id].size(), false});
        ++row;
      }
    }
  }
  return t;
}

Matrix SampletTransform::forward_columns(const Matrix& v) const {
  if (v.rows() != size()) throw InvalidArgument("samplet transform: size mismatch");
  const auto& nodes = tree_.nodes();
  const auto& perm = tree_.permutation();
  Matrix out(v.rows(), v.cols());
  std::vector<Matrix> scal(nodes.size());
  for (std::size_t id = nodes.size(); id-- > 0;) {
    const ClusterNode& node = nodes[id];
    const Block& b = blocks_[id];
    Matrix in(b.q.rows(), v.cols());
    if (node.is_leaf()) {
      for (Index k = node.begin; k < node.end; ++k) in.row(k - node.begin) = v.row(perm[static_cast<std::size_t>(k)]);
    } else {
      Index r = 0;
      for (Index c : node.children) {
        auto& sc = scal[static_cast<std::size_t>(c)];
        in.middleRows(r, sc.rows()) = sc;
        r += sc.rows();
        sc.resize(0, 0);
      }
    }
    Matrix coeffs = b.q.transpose() * in;
    const Index ns = b.q.cols() - b.scaling;
    if (ns > 0) out.middleRows(b.row_offset, ns) = coeffs.bottomRows(ns);
    scal[id] = coeffs.topRows(b.scaling);
  }
  out.topRows(blocks_.front().scaling) = scal.front();
  return out;
}

Matrix SampletTransform::inverse_columns(const Matrix& w) const {
  if (w.rows() != size()) throw InvalidArgument("samplet transform: size mismatch");
  const auto& nodes = tree_.nodes();
  const auto& perm = tree_.permutation();
  Matrix out(w.rows(), w.cols());
  std::vector<Matrix> scal(nodes.size());
  scal.front() = w.topRows(blocks_.front().scaling);
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const ClusterNode& node = nodes[id];
    const Block& b = blocks_[id];
    const Index ns = b.q.cols() - b.scaling;
    Matrix coeffs(b.q.cols(), w.cols());
    coeffs.topRows(b.scaling) = scal[id];
    if (ns > 0) coeffs.bottomRows(ns) = w.middleRows(b.row_offset, ns);
    scal[id].resize(0, 0);
    const Matrix in = b.q * coeffs;
    if (node.is_leaf()) {
      for (Index k = node.begin; k < node.end; ++k) out.row(perm[static_cast<std::size_t>(k)]) = in.row(k - node.begin);
    } else {
      Index r = 0;
      for (Index c : node.children) {
        const Index nc = blocks_[static_cast<std::size_t>(c)].scaling;
        scal[static_cast<std::size_t>(c)] = in.middleRows(r, nc);
        r += nc;
      }
    }
  }
  return out;
}

Vector SampletTransform::forward(const Vector& v) const { return forward_columns(v); }
Vector SampletTransform::inverse(const Vector& w) const { return inverse_columns(w); }

Matrix SampletTransform::dense() const { return forward_columns(Matrix::Identity(size(), size())); }

void SampletTransform::write_level_map(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "row,j,k,cluster,support_size,kind\n";
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const auto& info = rows_[r];
    out << r << ',' << info.level << ',' << info.k << ',' << info.cluster << ',' << info.support_size << ','
        << (info.scaling ? "scaling" : "samplet") << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix samplet_matrix(const SampletTransform& t, const Matrix& m) {
  const Matrix half = t.forward_columns(m);                   // T M
  Matrix full = t.forward_columns(half.transpose());          // T (T M)^T = T M^T T^T
  return full;
}

double CompressedKernelMatrix::compression_rate() const { return kdb::compression_rate(s); }

CompressedKernelMatrix threshold_samplet_matrix(const Matrix& a_sigma, double lambda, double threshold,
                                                ThresholdMode mode) {
  if (threshold < 0.0) throw InvalidArgument("threshold must be non-negative");
  const double cut = mode == ThresholdMode::absolute ? threshold : threshold * a_sigma.norm();
  std::vector<Triplet> triplets;
  for (Index j = 0; j < a_sigma.cols(); ++j) {
    for (Index i = 0; i < a_sigma.rows(); ++i) {
      if (i == j || !(std::abs(a_sigma(i, j)) < cut)) {
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), a_sigma(i, j));
      }
    }
  }
  CompressedKernelMatrix c;
  c.s.resize(a_sigma.rows(), a_sigma.cols());
  c.s.setFromTriplets(triplets.begin(), triplets.end());
  c.s.makeCompressed();
  c.threshold = threshold;
  c.lambda = lambda;
  return c;
}

CompressedKernelMatrix compress_kernel_matrix(const SampletTransform& t, const KernelMatrix& a, double threshold,
                                              ThresholdMode mode) {
  if (threshold < 0.0) throw InvalidArgument("threshold must be non-negative");
  Matrix dense = samplet_matrix(t, a.entries);
  // Exactly symmetric so the retained pattern is symmetric.
  dense = (0.5 * (dense + dense.transpose())).eval();
  return threshold_samplet_matrix(dense, a.regularization, threshold, mode);
}

CompressedKernelMatrix compress_kernel_matrix(const SampletTransform& t, const KernelSpec& spec,
                                              const DataSiteSet& sites, double lambda, double threshold,
                                              ThresholdMode mode) {
  return compress_kernel_matrix(t, assemble(spec, sites, lambda), threshold, mode);
}

#ifdef KDB_HAVE_CHOLMOD
namespace {
using NestedLLT = Eigen::CholmodSimplicialLLT<SparseMatrix, Eigen::Lower>;
}  // namespace
#endif

bool nested_dissection_available() {
#ifdef KDB_HAVE_CHOLMOD
  return true;
#else
  return false;
#endif
}

FillOrdering default_fill_ordering() {
  return nested_dissection_available() ? FillOrdering::nested_dissection : FillOrdering::amd;
}

SampletSolver::SampletSolver(const SampletTransform& t, const CompressedKernelMatrix& s, FillOrdering ordering)
    : t_(&t) {
  const double n2 = static_cast<double>(s.s.rows()) * static_cast<double>(s.s.cols());
  const char* failure = "sparse Cholesky of the compressed samplet matrix failed (over-compression?)";
  auto finish = [&](auto& llt) {
    if (llt->info() != Eigen::Success) throw NotPositiveDefinite(failure);
    factor_nnz_ = llt->matrixL().nestedExpression().nonZeros();
    factor_rate_ = static_cast<double>(factor_nnz_) / n2;
  };
  switch (ordering) {
    case FillOrdering::nested_dissection: {
#ifdef KDB_HAVE_CHOLMOD
      auto llt = std::make_shared<NestedLLT>();
      llt->cholmod().print = 0;
      llt->cholmod().nmethods = 1;
      llt->cholmod().method[0].ordering = CHOLMOD_METIS;
      llt->cholmod().postorder = 1;
      llt->compute(s.s);
      if (llt->info() != Eigen::Success) throw NotPositiveDefinite(failure);
      factor_nnz_ = static_cast<Index>(llt->cholmod().lnz);
      factor_rate_ = static_cast<double>(factor_nnz_) / n2;
      nested_ = llt;
      break;
#else
      throw InvalidArgument("nested dissection ordering needs a build with CHOLMOD");
#endif
    }
    case FillOrdering::amd:
      amd_ = std::make_shared<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>>(s.s);
      finish(amd_);
      break;
    case FillOrdering::natural:
      natural_ = std::make_shared<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>>(s.s);
      finish(natural_);
      break;
  }
}

Vector SampletSolver::solve(const Vector& rhs) const {
  const Vector w = t_->forward(rhs);
  Vector y;
  if (amd_) {
    y = amd_->solve(w);
  } else if (natural_) {
    y = natural_->solve(w);
  } else {
#ifdef KDB_HAVE_CHOLMOD
    y = static_cast<const NestedLLT*>(nested_.get())->solve(w);
#endif
  }
  return t_->inverse(y);
}

Vector factorize_and_solve(const SampletTransform& t, const CompressedKernelMatrix& s, const Vector& rhs) {
  return SampletSolver(t, s).solve(rhs);
}

Matrix embedded_samplet_evaluation(const SampletTransform& t, const KernelSpec& spec, const DataSiteSet& sites,
                                   const Matrix& queries) {
  // Coefficients of psi_r are row r of T, i.e. column r of T^T.
  const Matrix tt = t.inverse_columns(Matrix::Identity(t.size(), t.size()));
  return cross_kernel(spec, queries, sites) * tt;
}

Matrix dual_samplet_evaluation(const SampletTransform& t, const KernelSpec& spec, const DataSiteSet& sites,
                               double lambda, const Matrix& queries) {
  const Matrix a_sigma = samplet_matrix(t, assemble(spec, sites, lambda).entries);
  Eigen::LLT<Matrix> llt(a_sigma);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("samplet kernel matrix is not positive definite");
  const Matrix inv = llt.solve(Matrix::Identity(t.size(), t.size()));
  return embedded_samplet_evaluation(t, spec, sites, queries) * inv;
}

}  // namespace kdb
