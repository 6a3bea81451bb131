#pragma once

#include <kdb/types.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace kdb {

/// Axis-aligned box [lower, upper] in R^d.
struct Box {
  Vector lower;
  Vector upper;

  static Box unit(Index dim);
  static Box bounding(const Eigen::Ref<const Matrix>& points);

  Index dim() const { return lower.size(); }
  Vector extent() const { return upper - lower; }
  Vector center() const { return 0.5 * (lower + upper); }
  double diameter() const { return extent().norm(); }
  bool contains(const Eigen::Ref<const Vector>& p) const;
};

class NeighborIndex;

/// Scattered data sites X = {x_1, ..., x_N}, stored column-wise (d x N).
///
/// Immutable after construction. Construction rejects points outside the
/// domain box and coincident points, and builds a bucket grid used for exact
/// radius and nearest-neighbour queries.
class DataSiteSet {
 public:
  DataSiteSet(Matrix points, Box domain);

  Index size() const { return points_->cols(); }
  Index dim() const { return points_->rows(); }
  const Matrix& points() const { return *points_; }
  auto point(Index i) const { return points_->col(i); }
  const Box& domain() const { return domain_; }
  const NeighborIndex& index() const { return *index_; }

 private:
  std::shared_ptr<const Matrix> points_;
  Box domain_;
  std::shared_ptr<const NeighborIndex> index_;
};

/// Uniform bucket grid over a box. Queries are exact (Euclidean distance).
class NeighborIndex {
 public:
  NeighborIndex(std::shared_ptr<const Matrix> points, const Box& box);

  /// Indices j with |p - x_j| <= radius, ascending.
  IndexList within(const Eigen::Ref<const Vector>& p, double radius) const;

  /// Nearest site to p, optionally ignoring one index. Returns (index, distance).
  std::pair<Index, double> nearest(const Eigen::Ref<const Vector>& p,
                                   std::optional<Index> exclude = std::nullopt) const;

 private:
  Index cell_coord(double x, Index axis) const;
  Index linear_cell(const std::vector<Index>& c) const;

  std::shared_ptr<const Matrix> points_;
  Vector origin_;
  Vector width_;
  std::vector<Index> cells_per_axis_;
  std::vector<Index> cell_start_;
  std::vector<Index> order_;
};

struct GeometrySummary {
  double fill_distance_est = 0.0;
  double separation_radius = 0.0;
  double quasi_uniformity_ratio = 1.0;
};

/// n i.i.d. uniform points in [0,1]^dim from a seeded 64-bit Mersenne twister.
DataSiteSet generate_uniform(Index n, Index dim, std::uint64_t seed);

/// n equidistant points on [a, b] (d = 1), domain [a, b].
DataSiteSet equidistant_1d(Index n, double a, double b);

/// Separation radius is exact. The fill distance is estimated as the largest
/// nearest-site distance over a probe grid of probe_resolution^d points spanning
/// the domain box, which is a lower bound of the true value.
GeometrySummary geometry_summary(const DataSiteSet& sites, Index probe_resolution);

/// Probe resolution used by the tools when none is configured: about eight
/// probes per mean site spacing, capped at four million probes overall.
Index default_probe_resolution(Index n, Index dim);

IndexList neighbors_within(const DataSiteSet& sites, Index center_index, double radius);

struct ClusterNode {
  Index begin = 0;  // range into ClusterTree::permutation()
  Index end = 0;
  Index parent = -1;
  std::vector<Index> children;
  int level = 0;
  Box box;

  Index size() const { return end - begin; }
  bool is_leaf() const { return children.empty(); }
};

/// Binary cluster tree from recursive median bisection of the longest axis of
/// each cluster's bounding box. Node 0 is the root; nodes are stored in
/// depth-first preorder.
class ClusterTree {
 public:
  const std::vector<ClusterNode>& nodes() const { return nodes_; }
  const ClusterNode& node(Index id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const ClusterNode& root() const { return nodes_.front(); }
  /// permutation()[k] is the global site index at tree position k.
  const IndexList& permutation() const { return permutation_; }
  Index leaf_capacity() const { return leaf_capacity_; }
  int depth() const;

  /// Global indices owned by a node, in tree order.
  IndexList indices(Index id) const;

 private:
  friend ClusterTree build_cluster_tree(const DataSiteSet&, Index);

  std::vector<ClusterNode> nodes_;
  IndexList permutation_;
  Index leaf_capacity_ = 1;
};

ClusterTree build_cluster_tree(const DataSiteSet& sites, Index leaf_capacity);

// Point I/O. CSV: one point per row, decimal coordinates. Binary: "KDB1",
// u64 N, u32 d, then N*d f64, all little-endian.
Matrix read_points_csv(const std::filesystem::path& path, bool header = false);
void write_points_csv(const std::filesystem::path& path, const Matrix& points);
Matrix read_points_binary(const std::filesystem::path& path);
void write_points_binary(const std::filesystem::path& path, const Matrix& points);

}  // namespace kdb
