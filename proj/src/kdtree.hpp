#pragma once

// Static kd-tree over a row-major point set, for nearest-neighbour distance
// queries in low dimension.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace deltacert::detail {

class KdTree {
 public:
  KdTree(std::vector<double> points, std::size_t dim)
      : points_(std::move(points)), dim_(dim), index_(points_.size() / dim) {
    std::iota(index_.begin(), index_.end(), std::size_t{0});
    if (!index_.empty()) build(0, index_.size());
  }

  std::size_t size() const noexcept { return index_.size(); }

  /// Squared distance from q to its nearest point.
  double nearest_sq(std::span<const double> q) const {
    double best = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin, end;
    std::size_t axis = 0;
    double split = 0.0;
    long left = -1, right = -1;
  };

  const double* point(std::size_t i) const { return &points_[index_[i] * dim_]; }

  long build(std::size_t begin, std::size_t end) {
    const long id = static_cast<long>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    // Split along the axis of largest spread.
    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const double v = point(i)[a];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    if (widest <= 0.0) return id;  // all points coincide
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + static_cast<long>(begin),
                     index_.begin() + static_cast<long>(mid),
                     index_.begin() + static_cast<long>(end),
                     [&](std::size_t l, std::size_t r) {
                       return points_[l * dim_ + axis] < points_[r * dim_ + axis];
                     });
    const double split = point(mid)[axis];
    const long left = build(begin, mid);
    const long right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = split;
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  void search(long id, std::span<const double> q, double& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const double* pt = point(i);
        double d = 0.0;
        for (std::size_t a = 0; a < dim_ && d < best; ++a) {
          const double diff = q[a] - pt[a];
          d += diff * diff;
        }
        best = std::min(best, d);
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const long near = delta < 0.0 ? node.left : node.right;
    const long far = delta < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (delta * delta < best) search(far, q, best);
  }

  std::vector<double> points_;
  std::size_t dim_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace deltacert::detail
