#include <kdb/error.hpp>
#include <kdb/pointset.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace kdb {

Box Box::unit(Index dim) { return Box{Vector::Zero(dim), Vector::Ones(dim)}; }

Box Box::bounding(const Eigen::Ref<const Matrix>& points) {
  if (points.cols() == 0) throw InvalidArgument("bounding box of an empty point set");
  return Box{points.rowwise().minCoeff(), points.rowwise().maxCoeff()};
}

bool Box::contains(const Eigen::Ref<const Vector>& p) const {
  return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
}

namespace {

void check_distinct(const Matrix& points) {
  IndexList order(static_cast<std::size_t>(points.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index k = 0; k < points.rows(); ++k) {
      if (points(k, a) != points(k, b)) return points(k, a) < points(k, b);
    }
    return a < b;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (points.col(order[k]) == points.col(order[k - 1])) {
      throw DuplicatePoints("sites " + std::to_string(order[k - 1]) + " and " +
                            std::to_string(order[k]) + " coincide");
    }
  }
}

}  // namespace

DataSiteSet::DataSiteSet(Matrix points, Box domain)
    : points_(std::make_shared<const Matrix>(std::move(points))), domain_(std::move(domain)) {
  if (points_->cols() < 1 || points_->rows() < 1) throw InvalidArgument("empty site set");
  if (domain_.dim() != points_->rows()) throw InvalidArgument("domain box dimension mismatch");
  for (Index i = 0; i < points_->cols(); ++i) {
    if (!domain_.contains(points_->col(i))) {
      throw InvalidArgument("site " + std::to_string(i) + " lies outside the domain box");
    }
  }
  check_distinct(*points_);
  index_ = std::make_shared<const NeighborIndex>(points_, domain_);
}

// --- NeighborIndex -----------------------------------------------------------

NeighborIndex::NeighborIndex(std::shared_ptr<const Matrix> points, const Box& box)
    : points_(std::move(points)) {
  const Index dim = points_->rows();
  const Index n = points_->cols();
  Box grid_box = box;
  Box tight = Box::bounding(*points_);
  grid_box.lower = grid_box.lower.cwiseMin(tight.lower);
  grid_box.upper = grid_box.upper.cwiseMax(tight.upper);

  // About two sites per cell for uniform data.
  const double per_axis = std::pow(std::max(1.0, static_cast<double>(n) / 2.0), 1.0 / dim);
  const Index cells = std::max<Index>(1, static_cast<Index>(std::floor(per_axis)));
  origin_ = grid_box.lower;
  width_ = Vector(dim);
  cells_per_axis_.assign(static_cast<std::size_t>(dim), cells);
  Index total = 1;
  for (Index k = 0; k < dim; ++k) {
    const double extent = grid_box.upper(k) - grid_box.lower(k);
    if (extent <= 0.0) {
      cells_per_axis_[static_cast<std::size_t>(k)] = 1;
      width_(k) = 1.0;
    } else {
      width_(k) = extent / static_cast<double>(cells);
    }
    total *= cells_per_axis_[static_cast<std::size_t>(k)];
  }

  std::vector<Index> cell_of(static_cast<std::size_t>(n));
  std::vector<Index> c(static_cast<std::size_t>(dim));
  cell_start_.assign(static_cast<std::size_t>(total + 1), 0);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < dim; ++k) c[static_cast<std::size_t>(k)] = cell_coord((*points_)(k, i), k);
    cell_of[static_cast<std::size_t>(i)] = linear_cell(c);
    ++cell_start_[static_cast<std::size_t>(cell_of[static_cast<std::size_t>(i)] + 1)];
  }
  std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
  order_.resize(static_cast<std::size_t>(n));
  std::vector<Index> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (Index i = 0; i < n; ++i) {
    order_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cell_of[static_cast<std::size_t>(i)])]++)] = i;
  }
}

Index NeighborIndex::cell_coord(double x, Index axis) const {
  const Index cells = cells_per_axis_[static_cast<std::size_t>(axis)];
  const double t = std::floor((x - origin_(axis)) / width_(axis));
  if (!(t >= 0.0)) return 0;
  return std::min(cells - 1, static_cast<Index>(t));
}

Index NeighborIndex::linear_cell(const std::vector<Index>& c) const {
  Index id = 0;
  for (std::size_t k = c.size(); k-- > 0;) id = id * cells_per_axis_[k] + c[k];
  return id;
}

namespace {

// Visits every integer vector in the box [lo, hi] (inclusive, per axis).
template <typename F>
void for_each_cell(const std::vector<Index>& lo, const std::vector<Index>& hi, F&& f) {
  std::vector<Index> c = lo;
  for (;;) {
    f(c);
    std::size_t k = 0;
    for (; k < c.size(); ++k) {
      if (++c[k] <= hi[k]) break;
      c[k] = lo[k];
    }
    if (k == c.size()) return;
  }
}

}  // namespace

IndexList NeighborIndex::within(const Eigen::Ref<const Vector>& p, double radius) const {
  const auto dim = static_cast<std::size_t>(points_->rows());
  std::vector<Index> lo(dim), hi(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const auto axis = static_cast<Index>(k);
    lo[k] = cell_coord(p(axis) - radius, axis);
    hi[k] = cell_coord(p(axis) + radius, axis);
  }
  IndexList out;
  for_each_cell(lo, hi, [&](const std::vector<Index>& c) {
    const Index cell = linear_cell(c);
    for (Index s = cell_start_[static_cast<std::size_t>(cell)]; s < cell_start_[static_cast<std::size_t>(cell + 1)]; ++s) {
      const Index j = order_[static_cast<std::size_t>(s)];
      if ((points_->col(j) - p).norm() <= radius) out.push_back(j);
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<Index, double> NeighborIndex::nearest(const Eigen::Ref<const Vector>& p,
                                                std::optional<Index> exclude) const {
  const auto dim = static_cast<std::size_t>(points_->rows());
  std::vector<Index> center(dim);
  Index max_ring = 0;
  for (std::size_t k = 0; k < dim; ++k) {
    center[k] = cell_coord(p(static_cast<Index>(k)), static_cast<Index>(k));
    max_ring = std::max({max_ring, center[k], cells_per_axis_[k] - 1 - center[k]});
  }
  const double min_width = width_.minCoeff();

  Index best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<Index> lo(dim), hi(dim);
  for (Index ring = 0; ring <= max_ring; ++ring) {
    for (std::size_t k = 0; k < dim; ++k) {
      lo[k] = std::max<Index>(0, center[k] - ring);
      hi[k] = std::min<Index>(cells_per_axis_[k] - 1, center[k] + ring);
    }
    for_each_cell(lo, hi, [&](const std::vector<Index>& c) {
      Index cheb = 0;
      for (std::size_t k = 0; k < dim; ++k) cheb = std::max(cheb, std::abs(c[k] - center[k]));
      if (cheb != ring) return;
      const Index cell = linear_cell(c);
      for (Index s = cell_start_[static_cast<std::size_t>(cell)]; s < cell_start_[static_cast<std::size_t>(cell + 1)]; ++s) {
        const Index j = order_[static_cast<std::size_t>(s)];
        if (exclude && *exclude == j) continue;
        const double dist = (points_->col(j) - p).norm();
        if (dist < best_dist || (dist == best_dist && j < best)) {
          best_dist = dist;
          best = j;
        }
      }
    });
    // Every cell beyond this ring is at least ring * min_width away from p.
    if (best >= 0 && best_dist <= static_cast<double>(ring) * min_width) break;
  }
  return {best, best_dist};
}

// --- generation and geometry ---------------------------------------------------

DataSiteSet generate_uniform(Index n, Index dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Matrix points(dim, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < dim; ++k) {
      // 53 random mantissa bits; stable across standard library implementations.
      points(k, i) = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    }
  }
  return DataSiteSet(std::move(points), Box::unit(dim));
}

DataSiteSet equidistant_1d(Index n, double a, double b) {
  Matrix points(1, n);
  for (Index i = 0; i < n; ++i) {
    points(0, i) = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  points(0, n - 1) = n == 1 ? a : b;
  return DataSiteSet(std::move(points), Box{Vector::Constant(1, a), Vector::Constant(1, b)});
}

GeometrySummary geometry_summary(const DataSiteSet& sites, Index probe_resolution) {
  if (sites.size() < 2) throw InvalidArgument("geometry summary needs at least two sites");
  if (probe_resolution < 1) throw InvalidArgument("probe resolution must be positive");
  const NeighborIndex& index = sites.index();

  double min_dist = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < sites.size(); ++i) {
    min_dist = std::min(min_dist, index.nearest(sites.point(i), i).second);
  }
  if (!(min_dist > 0.0)) throw DuplicatePoints("minimum pairwise distance is zero");

  const Index dim = sites.dim();
  const Box& box = sites.domain();
  std::vector<Index> lo(static_cast<std::size_t>(dim), 0);
  std::vector<Index> hi(static_cast<std::size_t>(dim), probe_resolution - 1);
  Vector probe(dim);
  double fill = 0.0;
  for_each_cell(lo, hi, [&](const std::vector<Index>& c) {
    for (Index k = 0; k < dim; ++k) {
      const double t = probe_resolution == 1
                           ? 0.5
                           : static_cast<double>(c[static_cast<std::size_t>(k)]) /
                                 static_cast<double>(probe_resolution - 1);
      probe(k) = box.lower(k) + t * (box.upper(k) - box.lower(k));
    }
    fill = std::max(fill, index.nearest(probe).second);
  });

  GeometrySummary summary;
  summary.separation_radius = 0.5 * min_dist;
  // The probe estimate can undershoot q_X on coarse grids; h >= q_X always holds.
  summary.fill_distance_est = std::max(fill, summary.separation_radius);
  summary.quasi_uniformity_ratio = summary.fill_distance_est / summary.separation_radius;
  return summary;
}

Index default_probe_resolution(Index n, Index dim) {
  const double per_axis = 8.0 * std::pow(static_cast<double>(n), 1.0 / static_cast<double>(dim)) + 1.0;
  const double cap = std::pow(4.0e6, 1.0 / static_cast<double>(dim));
  return std::max<Index>(2, static_cast<Index>(std::ceil(std::min(per_axis, cap))));
}

IndexList neighbors_within(const DataSiteSet& sites, Index center_index, double radius) {
  if (center_index < 0 || center_index >= sites.size()) throw InvalidArgument("site index out of range");
  if (radius < 0.0) throw InvalidArgument("negative radius");
  return sites.index().within(sites.point(center_index), radius);
}

// --- cluster tree ------------------------------------------------------------

int ClusterTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.level);
  return d;
}

IndexList ClusterTree::indices(Index id) const {
  const auto& n = node(id);
  return IndexList(permutation_.begin() + n.begin, permutation_.begin() + n.end);
}

ClusterTree build_cluster_tree(const DataSiteSet& sites, Index leaf_capacity) {
  if (leaf_capacity < 1) throw InvalidArgument("leaf capacity must be positive");
  const Matrix& x = sites.points();
  ClusterTree tree;
  tree.leaf_capacity_ = leaf_capacity;
  tree.permutation_.resize(static_cast<std::size_t>(sites.size()));
  std::iota(tree.permutation_.begin(), tree.permutation_.end(), Index{0});

  auto tight_box = [&](Index begin, Index end) {
    Box b{x.col(tree.permutation_[static_cast<std::size_t>(begin)]),
          x.col(tree.permutation_[static_cast<std::size_t>(begin)])};
    for (Index k = begin + 1; k < end; ++k) {
      b.lower = b.lower.cwiseMin(x.col(tree.permutation_[static_cast<std::size_t>(k)]));
      b.upper = b.upper.cwiseMax(x.col(tree.permutation_[static_cast<std::size_t>(k)]));
    }
    return b;
  };

  // Depth-first construction keeps nodes in preorder.
  auto build = [&](auto&& self, Index begin, Index end, Index parent, int level) -> Index {
    const auto id = static_cast<Index>(tree.nodes_.size());
    ClusterNode node;
    node.begin = begin;
    node.end = end;
    node.parent = parent;
    node.level = level;
    node.box = tight_box(begin, end);
    tree.nodes_.push_back(std::move(node));
    if (end - begin <= leaf_capacity) return id;

    Index axis = 0;
    tree.nodes_[static_cast<std::size_t>(id)].box.extent().maxCoeff(&axis);
    auto first = tree.permutation_.begin() + begin;
    auto last = tree.permutation_.begin() + end;
    std::sort(first, last, [&](Index a, Index b) {
      if (x(axis, a) != x(axis, b)) return x(axis, a) < x(axis, b);
      return a < b;
    });
    const Index mid = begin + (end - begin) / 2;
    const Index left = self(self, begin, mid, id, level + 1);
    const Index right = self(self, mid, end, id, level + 1);
    tree.nodes_[static_cast<std::size_t>(id)].children = {left, right};
    return id;
  };
  build(build, 0, sites.size(), -1, 0);
  return tree;
}

// --- point I/O ---------------------------------------------------------------

Matrix read_points_csv(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool skip = header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip) {
      skip = false;
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(field, &used));
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad coordinate '" + field + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": no points");
  Matrix points(static_cast<Index>(rows.front().size()), static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) points(static_cast<Index>(k), static_cast<Index>(i)) = rows[i][k];
  }
  return points;
}

void write_points_csv(const std::filesystem::path& path, const Matrix& points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.precision(17);
  for (Index i = 0; i < points.cols(); ++i) {
    for (Index k = 0; k < points.rows(); ++k) out << (k ? "," : "") << points(k, i);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("truncated binary point file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

Matrix read_points_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "KDB1", 4) != 0) throw IoError(path.string() + ": bad magic");
  const auto n = get_le<std::uint64_t>(in);
  const auto d = get_le<std::uint32_t>(in);
  Matrix points(static_cast<Index>(d), static_cast<Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint32_t k = 0; k < d; ++k) points(k, static_cast<Index>(i)) = get_le<double>(in);
  }
  return points;
}

void write_points_binary(const std::filesystem::path& path, const Matrix& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("KDB1", 4);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(points.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.rows()));
  for (Index i = 0; i < points.cols(); ++i) {
    for (Index k = 0; k < points.rows(); ++k) put_le<double>(out, points(k, i));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace kdb
