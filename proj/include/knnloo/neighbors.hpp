#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "knnloo/dataset.hpp"

namespace knnloo {

enum class TieMode { seeded_uniform, index_order };

/// How equal-distance candidates are ordered. In seeded-uniform mode each
/// candidate j of row i gets a key that is a pure function of (seed, i, j),
/// so every block of tied candidates is a uniformly random permutation that
/// does not depend on scheduling or iteration order.
struct TieRule {
  std::uint64_t seed = 42;
  TieMode mode = TieMode::seeded_uniform;

  std::uint64_t key(std::uint64_t row, std::uint32_t candidate) const;

  friend bool operator==(const TieRule&, const TieRule&) = default;
};

/// One ranked candidate: squared distance, tie key, index.
struct Candidate {
  double dist_sq;
  std::uint64_t key;
  std::uint32_t index;

  friend bool operator<(const Candidate& a, const Candidate& b) {
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    if (a.key != b.key) return a.key < b.key;
    return a.index < b.index;
  }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Row identifier used for tie keys of out-of-sample queries.
std::uint64_t query_row_id(std::span<const double> x);

/// Exhaustive per-row kernel: the k best candidates among all points except
/// `exclude` (pass data.size() to exclude none), sorted ascending. `scratch`
/// is reused between calls.
void nearest_exhaustive(const Matrix& points, std::span<const double> x, std::size_t exclude,
                        std::size_t k, const TieRule& tie, std::uint64_t row_id,
                        std::vector<Candidate>& scratch, std::vector<Candidate>& out);

/// Exact k-d tree over a fixed point set, ranking with the same comparator as
/// the exhaustive kernel so both return identical neighbor lists.
class KdTree {
 public:
  explicit KdTree(const Matrix& points, std::size_t leaf_size = 16);

  void nearest(std::span<const double> x, std::size_t exclude, std::size_t k,
               const TieRule& tie, std::uint64_t row_id, std::vector<Candidate>& out) const;

  std::size_t size() const noexcept { return index_.size(); }

 private:
  struct Node {
    std::size_t begin, end;     // range into index_
    std::size_t left, right;    // child node ids, 0 for leaves
    std::vector<double> lo, hi; // bounding box
  };

  std::size_t build(std::size_t begin, std::size_t end);

  const Matrix* points_;
  std::size_t leaf_size_;
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
};

enum class Backend { automatic, exhaustive, kd_tree };

/// Backend used by `automatic`: the tree pays off only for large n with a
/// neighbor depth well below n.
Backend choose_backend(std::size_t n, std::size_t k_max);

/// For each point i, its k_max nearest other points in nondecreasing
/// Euclidean distance. N_k(i) is the first k entries of row(i).
class NeighborTable {
 public:
  NeighborTable(std::size_t n, std::size_t k_max, TieRule tie,
                std::vector<std::uint32_t> order, std::vector<double> distances);

  std::size_t size() const noexcept { return n_; }
  std::size_t k_max() const noexcept { return k_max_; }
  const TieRule& tie() const noexcept { return tie_; }

  std::span<const std::uint32_t> row(std::size_t i) const {
    return {order_.data() + i * k_max_, k_max_};
  }
  std::span<const std::uint32_t> neighbors(std::size_t i, std::size_t k) const {
    return {order_.data() + i * k_max_, k};
  }
  std::span<const double> distances(std::size_t i) const {
    return {distances_.data() + i * k_max_, k_max_};
  }

  /// One row as JSON (1-based indices), for debugging.
  std::string dump_row(std::size_t i) const;

  friend bool operator==(const NeighborTable&, const NeighborTable&) = default;

 private:
  std::size_t n_;
  std::size_t k_max_;
  TieRule tie_;
  std::vector<std::uint32_t> order_;
  std::vector<double> distances_;
};

/// Throws validation_error unless 1 <= k_max <= n-1.
NeighborTable build_table(const Dataset& data, std::size_t k_max, const TieRule& tie,
                          Backend backend = Backend::automatic);

/// Produces sorted neighbor rows on demand, without materializing the table.
/// row() is const and safe to call concurrently with per-thread buffers.
class RowSource {
 public:
  RowSource(const Dataset& data, std::size_t k_max, const TieRule& tie,
            Backend backend = Backend::automatic);

  std::size_t k_max() const noexcept { return k_max_; }
  Backend backend() const noexcept { return backend_; }

  /// Fills `out` with the k_max sorted candidates of row i.
  void row(std::size_t i, std::vector<Candidate>& scratch, std::vector<Candidate>& out) const;

 private:
  const Dataset* data_;
  std::size_t k_max_;
  TieRule tie_;
  Backend backend_;
  std::unique_ptr<KdTree> tree_;
};

/// Indices of the k training points nearest to x (no self-exclusion).
std::vector<std::size_t> query_neighbors(const Dataset& data, std::span<const double> x,
                                         std::size_t k, const TieRule& tie);

/// count[l] = |{j : l in N_k(j)}|; the counts sum to n*k.
std::vector<std::size_t> in_degree(const NeighborTable& table, std::size_t k);

}  // namespace knnloo
