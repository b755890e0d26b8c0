#include "knnloo/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "knnloo/error.hpp"
#include "knnloo/parallel.hpp"

namespace knnloo {

std::uint64_t TieRule::key(std::uint64_t row, std::uint32_t candidate) const {
  if (mode == TieMode::index_order) return 0;
  return derive_seed(seed, row, candidate);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

std::uint64_t query_row_id(std::span<const double> x) {
  std::uint64_t h = 0x51ed270b27a5bd9dULL;
  for (double v : x) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h | (1ULL << 63);
}

void nearest_exhaustive(const Matrix& points, std::span<const double> x, std::size_t exclude,
                        std::size_t k, const TieRule& tie, std::uint64_t row_id,
                        std::vector<Candidate>& scratch, std::vector<Candidate>& out) {
  const std::size_t n = points.rows();
  scratch.clear();
  scratch.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == exclude) continue;
    const auto idx = static_cast<std::uint32_t>(j);
    scratch.push_back({squared_distance(x, points.row(j)), tie.key(row_id, idx), idx});
  }
  k = std::min(k, scratch.size());
  if (k < scratch.size()) {
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                     scratch.end());
  }
  std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
  out.assign(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
}

Backend choose_backend(std::size_t n, std::size_t k_max) {
  return (n >= 2048 && k_max * 8 <= n) ? Backend::kd_tree : Backend::exhaustive;
}

NeighborTable::NeighborTable(std::size_t n, std::size_t k_max, TieRule tie,
                             std::vector<std::uint32_t> order, std::vector<double> distances)
    : n_(n), k_max_(k_max), tie_(tie), order_(std::move(order)), distances_(std::move(distances)) {
  if (order_.size() != n_ * k_max_ || distances_.size() != n_ * k_max_) {
    throw validation_error("neighbor table storage does not match n * k_max");
  }
}

std::string NeighborTable::dump_row(std::size_t i) const {
  nlohmann::ordered_json j;
  j["row"] = i + 1;
  std::vector<std::size_t> idx;
  for (auto v : row(i)) idx.push_back(v + 1);
  j["neighbors"] = idx;
  j["distances"] = std::vector<double>(distances(i).begin(), distances(i).end());
  return j.dump();
}

RowSource::RowSource(const Dataset& data, std::size_t k_max, const TieRule& tie, Backend backend)
    : data_(&data), k_max_(k_max), tie_(tie), backend_(backend) {
  const std::size_t n = data.size();
  if (k_max < 1 || k_max > n - 1) {
    throw validation_error("k_max must lie in [1, n-1] = [1, " + std::to_string(n - 1) +
                           "], got " + std::to_string(k_max));
  }
  if (backend_ == Backend::automatic) backend_ = choose_backend(n, k_max);
  if (backend_ == Backend::kd_tree) tree_ = std::make_unique<KdTree>(data.points());
}

void RowSource::row(std::size_t i, std::vector<Candidate>& scratch,
                    std::vector<Candidate>& out) const {
  if (tree_) {
    tree_->nearest(data_->point(i), i, k_max_, tie_, i, out);
  } else {
    nearest_exhaustive(data_->points(), data_->point(i), i, k_max_, tie_, i, scratch, out);
  }
}

NeighborTable build_table(const Dataset& data, std::size_t k_max, const TieRule& tie,
                          Backend backend) {
  const RowSource source(data, k_max, tie, backend);
  const std::size_t n = data.size();
  std::vector<std::uint32_t> order(n * k_max);
  std::vector<double> distances(n * k_max);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<Candidate> scratch, best;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto i = static_cast<std::size_t>(r);
      source.row(i, scratch, best);
      for (std::size_t k = 0; k < k_max; ++k) {
        order[i * k_max + k] = best[k].index;
        distances[i * k_max + k] = std::sqrt(best[k].dist_sq);
      }
    }
  }
  return NeighborTable(n, k_max, tie, std::move(order), std::move(distances));
}

std::vector<std::size_t> query_neighbors(const Dataset& data, std::span<const double> x,
                                         std::size_t k, const TieRule& tie) {
  if (x.size() != data.dim()) {
    throw validation_error("query has dimension " + std::to_string(x.size()) +
                           ", data has " + std::to_string(data.dim()));
  }
  if (k < 1 || k > data.size()) {
    throw validation_error("k must lie in [1, n] = [1, " + std::to_string(data.size()) +
                           "], got " + std::to_string(k));
  }
  std::vector<Candidate> scratch, best;
  nearest_exhaustive(data.points(), x, data.size(), k, tie, query_row_id(x), scratch, best);
  std::vector<std::size_t> out(best.size());
  std::transform(best.begin(), best.end(), out.begin(), [](const Candidate& c) { return c.index; });
  return out;
}

std::vector<std::size_t> in_degree(const NeighborTable& table, std::size_t k) {
  if (k < 1 || k > table.k_max()) {
    throw validation_error("k must lie in [1, k_max] = [1, " + std::to_string(table.k_max()) +
                           "], got " + std::to_string(k));
  }
  std::vector<std::size_t> count(table.size(), 0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (auto j : table.neighbors(i, k)) ++count[j];
  }
  return count;
}

}  // namespace knnloo
