#include "chatcad/kdtree.hpp"

#include <algorithm>
#include <limits>

#include "chatcad/error.hpp"
#include "chatcad/vec.hpp"

namespace chatcad {

void normalize_ties(std::vector<Neighbor>& sorted) {
  std::size_t start = 0;
  while (start < sorted.size()) {
    std::size_t end = start + 1;
    while (end < sorted.size() && sorted[end].distance - sorted[start].distance <= kDistanceTieTolerance) ++end;
    if (end - start > 1) {
      std::stable_sort(sorted.begin() + static_cast<std::ptrdiff_t>(start),
                       sorted.begin() + static_cast<std::ptrdiff_t>(end),
                       [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
    }
    start = end;
  }
}

KdTree::KdTree(std::vector<double> points, std::size_t dims) : points_(std::move(points)), dims_(dims) {
  if (dims_ == 0 || points_.size() % dims_ != 0) {
    throw Error(ErrorCode::InvalidArgument, "point buffer is not a multiple of the dimension");
  }
  std::vector<std::uint32_t> order(size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  nodes_.reserve(order.size());
  if (!order.empty()) build(order, 0, order.size(), 0);
}

KdTree::KdTree(std::vector<double> points, std::size_t dims, std::vector<Node> nodes)
    : points_(std::move(points)), dims_(dims), nodes_(std::move(nodes)) {
  if (dims_ == 0 || points_.size() % dims_ != 0) {
    throw Error(ErrorCode::MalformedIndex, "point buffer is not a multiple of the dimension");
  }
  validate();
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& order, std::size_t lo, std::size_t hi, std::size_t depth) {
  if (lo >= hi) return -1;
  const auto dim = static_cast<std::uint32_t>(depth % dims_);
  const auto first = order.begin() + static_cast<std::ptrdiff_t>(lo);
  const auto last = order.begin() + static_cast<std::ptrdiff_t>(hi);
  std::sort(first, last, [&](std::uint32_t a, std::uint32_t b) {
    const double ca = points_[a * dims_ + dim];
    const double cb = points_[b * dims_ + dim];
    return ca != cb ? ca < cb : a < b;
  });
  const std::size_t mid = lo + (hi - lo) / 2;
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({order[mid], dim, -1, -1});
  const auto left = build(order, lo, mid, depth + 1);
  const auto right = build(order, mid + 1, hi, depth + 1);
  nodes_[static_cast<std::size_t>(index)].left = left;
  nodes_[static_cast<std::size_t>(index)].right = right;
  return index;
}

void KdTree::validate() const {
  const std::size_t n = size();
  if (nodes_.size() != n) throw Error(ErrorCode::MalformedIndex, "node count does not match point count");
  if (n == 0) return;
  std::vector<char> seen_point(n, 0);
  std::vector<char> seen_node(n, 0);
  // (node, lower bounds, upper bounds) walk, iterative to survive deep trees.
  struct Frame {
    std::int32_t node;
    std::vector<double> lo, hi;
  };
  std::vector<Frame> stack;
  stack.push_back({0, std::vector<double>(dims_, -std::numeric_limits<double>::infinity()),
                   std::vector<double>(dims_, std::numeric_limits<double>::infinity())});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.node < 0) continue;
    if (static_cast<std::size_t>(f.node) >= n) throw Error(ErrorCode::MalformedIndex, "child index out of range");
    auto& nseen = seen_node[static_cast<std::size_t>(f.node)];
    if (nseen) throw Error(ErrorCode::MalformedIndex, "node reachable twice");
    nseen = 1;
    const Node& node = nodes_[static_cast<std::size_t>(f.node)];
    if (node.point >= n || node.dim >= dims_) throw Error(ErrorCode::MalformedIndex, "node fields out of range");
    if (seen_point[node.point]) throw Error(ErrorCode::MalformedIndex, "point stored twice");
    seen_point[node.point] = 1;
    const auto p = point(node.point);
    for (std::size_t d = 0; d < dims_; ++d) {
      if (p[d] < f.lo[d] || p[d] > f.hi[d]) throw Error(ErrorCode::MalformedIndex, "split invariant violated");
    }
    const double split = p[node.dim];
    Frame left{node.left, f.lo, f.hi};
    left.hi[node.dim] = std::min(left.hi[node.dim], split);
    Frame right{node.right, std::move(f.lo), std::move(f.hi)};
    right.lo[node.dim] = std::max(right.lo[node.dim], split);
    stack.push_back(std::move(left));
    stack.push_back(std::move(right));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen_point[i]) throw Error(ErrorCode::MalformedIndex, "point unreachable from root");
  }
}

std::size_t KdTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    if (node < 0) continue;
    best = std::max(best, d);
    stack.emplace_back(nodes_[static_cast<std::size_t>(node)].left, d + 1);
    stack.emplace_back(nodes_[static_cast<std::size_t>(node)].right, d + 1);
  }
  return best;
}

namespace {

/// Sorted candidate list holding the k best plus anything within the tie
/// tolerance of the current k-th distance.
class Candidates {
 public:
  explicit Candidates(std::size_t k) : k_(k) {}

  [[nodiscard]] bool full() const noexcept { return items_.size() >= k_; }
  [[nodiscard]] double bound() const noexcept { return items_[k_ - 1].distance; }

  void offer(Neighbor n) {
    if (full() && n.distance > bound() + kDistanceTieTolerance) return;
    const auto pos = std::upper_bound(items_.begin(), items_.end(), n, [](const Neighbor& a, const Neighbor& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    items_.insert(pos, n);
    if (full()) {
      const double cut = bound() + kDistanceTieTolerance;
      while (items_.size() > k_ && items_.back().distance > cut) items_.pop_back();
    }
  }

  std::vector<Neighbor> take() && {
    normalize_ties(items_);
    if (items_.size() > k_) items_.resize(k_);
    return std::move(items_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> items_;
};

}  // namespace

std::vector<Neighbor> KdTree::nearest(std::span<const double> query, std::size_t k, SearchStats* stats) const {
  if (query.size() != dims_) throw Error(ErrorCode::DimensionMismatch, "query dimension does not match tree");
  k = std::min(k, size());
  if (k == 0) return {};
  Candidates best(k);
  std::size_t visited = 0;

  // Explicit stack of (node, lower bound on distance to its region along the
  // parent's split). Near children are pushed last so they pop first.
  struct Pending {
    std::int32_t node;
    double plane_gap;
  };
  std::vector<Pending> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    if (cur.node < 0) continue;
    if (best.full() && cur.plane_gap > best.bound() + kDistanceTieTolerance) continue;
    ++visited;
    const Node& node = nodes_[static_cast<std::size_t>(cur.node)];
    const auto p = point(node.point);
    best.offer({node.point, l2(query, p)});
    const double diff = query[node.dim] - p[node.dim];
    const auto near = diff <= 0.0 ? node.left : node.right;
    const auto far = diff <= 0.0 ? node.right : node.left;
    stack.push_back({far, std::max(cur.plane_gap, std::abs(diff))});
    stack.push_back({near, cur.plane_gap});
  }
  if (stats) stats->nodes_visited += visited;
  return std::move(best).take();
}

}  // namespace chatcad
