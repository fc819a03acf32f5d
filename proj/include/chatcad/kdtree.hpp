#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chatcad {

/// Distances closer than this are treated as equal and ordered by id, so that
/// mathematically tied neighbours rank the same regardless of rounding.
inline constexpr double kDistanceTieTolerance = 1e-12;

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Reorders runs of neighbours whose distances lie within kDistanceTieTolerance
/// of the run's first element by ascending id. Input must be sorted by distance.
void normalize_ties(std::vector<Neighbor>& sorted);

struct SearchStats {
  std::size_t nodes_visited = 0;
};

/// Balanced KD-tree over row-major points. Split dimension is depth mod dims;
/// each node holds the median of its range ordered by (coordinate, id), so
/// points with the split coordinate may sit on either side.
class KdTree {
 public:
  struct Node {
    std::uint32_t point = 0;
    std::uint32_t dim = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool operator==(const Node&) const = default;
  };

  KdTree() = default;
  KdTree(std::vector<double> points, std::size_t dims);
  /// Rebuilds from serialized nodes; throws MalformedIndex unless every point
  /// is reachable exactly once and the split invariant holds.
  KdTree(std::vector<double> points, std::size_t dims, std::vector<Node> nodes);

  /// k nearest points under L2, ascending distance, ties by lower id. k is
  /// clamped to size().
  [[nodiscard]] std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k,
                                              SearchStats* stats = nullptr) const;

  [[nodiscard]] std::size_t size() const noexcept { return dims_ ? points_.size() / dims_ : 0; }
  [[nodiscard]] std::size_t dims() const noexcept { return dims_; }
  [[nodiscard]] std::size_t depth() const;
  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return std::span<const double>(points_).subspan(i * dims_, dims_);
  }
  [[nodiscard]] std::span<const double> points() const noexcept { return points_; }

 private:
  std::int32_t build(std::vector<std::uint32_t>& order, std::size_t lo, std::size_t hi, std::size_t depth);
  void validate() const;

  std::vector<double> points_;
  std::size_t dims_ = 0;
  std::vector<Node> nodes_;  // preorder, root at 0
};

}  // namespace chatcad
