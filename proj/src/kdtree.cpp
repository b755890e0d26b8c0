#include <algorithm>
#include <queue>

#include "knnloo/neighbors.hpp"

namespace knnloo {

KdTree::KdTree(const Matrix& points, std::size_t leaf_size)
    : points_(&points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  index_.resize(points.rows());
  for (std::size_t i = 0; i < index_.size(); ++i) index_[i] = static_cast<std::uint32_t>(i);
  nodes_.reserve(2 * index_.size() / leaf_size_ + 1);
  build(0, index_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t d = points_->cols();
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, 0, 0, std::vector<double>(d), std::vector<double>(d)});
  {
    Node& node = nodes_[id];
    for (std::size_t j = 0; j < d; ++j) {
      node.lo[j] = node.hi[j] = (*points_)(index_[begin], j);
    }
    for (std::size_t p = begin + 1; p < end; ++p) {
      for (std::size_t j = 0; j < d; ++j) {
        const double v = (*points_)(index_[p], j);
        node.lo[j] = std::min(node.lo[j], v);
        node.hi[j] = std::max(node.hi[j], v);
      }
    }
  }
  if (end - begin <= leaf_size_) return id;

  std::size_t axis = 0;
  double widest = -1.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double w = nodes_[id].hi[j] - nodes_[id].lo[j];
    if (w > widest) {
      widest = w;
      axis = j;
    }
  }
  if (widest <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  auto by_axis = [this, axis](std::uint32_t a, std::uint32_t b) {
    const double va = (*points_)(a, axis), vb = (*points_)(b, axis);
    return va != vb ? va < vb : a < b;
  };
  std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                   index_.begin() + static_cast<std::ptrdiff_t>(mid),
                   index_.begin() + static_cast<std::ptrdiff_t>(end), by_axis);
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

// Lower bound on the squared distance from x to any point in the box. Each
// term is <= the matching term of squared_distance() and rounding is
// monotone, so the bound never exceeds a computed distance.
double box_distance_sq(std::span<const double> x, const std::vector<double>& lo,
                       const std::vector<double>& hi) {
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    double diff = 0.0;
    if (x[j] < lo[j]) {
      diff = lo[j] - x[j];
    } else if (x[j] > hi[j]) {
      diff = x[j] - hi[j];
    }
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

void KdTree::nearest(std::span<const double> x, std::size_t exclude, std::size_t k,
                     const TieRule& tie, std::uint64_t row_id, std::vector<Candidate>& out) const {
  // Max-heap on the candidate order: top() is the current worst of the best k.
  std::priority_queue<Candidate> heap;
  const std::size_t available = index_.size() - (exclude < index_.size() ? 1 : 0);
  k = std::min(k, available);
  if (k == 0) {
    out.clear();
    return;
  }

  struct Pending {
    double bound;
    std::size_t node;
    bool operator>(const Pending& o) const { return bound > o.bound; }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> frontier;
  frontier.push({box_distance_sq(x, nodes_[0].lo, nodes_[0].hi), 0});

  while (!frontier.empty()) {
    const Pending next = frontier.top();
    frontier.pop();
    // Equal bounds must still be explored: a tied candidate may win on key.
    if (heap.size() == k && next.bound > heap.top().dist_sq) break;
    const Node& node = nodes_[next.node];
    if (node.left == 0) {
      for (std::size_t p = node.begin; p < node.end; ++p) {
        const std::uint32_t j = index_[p];
        if (j == exclude) continue;
        const Candidate c{squared_distance(x, points_->row(j)), tie.key(row_id, j), j};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    for (std::size_t child : {node.left, node.right}) {
      const double bound = box_distance_sq(x, nodes_[child].lo, nodes_[child].hi);
      if (heap.size() < k || bound <= heap.top().dist_sq) frontier.push({bound, child});
    }
  }

  out.resize(heap.size());
  for (std::size_t r = heap.size(); r-- > 0;) {
    out[r] = heap.top();
    heap.pop();
  }
}

}  // namespace knnloo
