#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "knnloo/error.hpp"
#include "knnloo/neighbors.hpp"
#include "knnloo/parallel.hpp"
#include "oracle.hpp"
#include "reference.hpp"

using namespace knnloo;

namespace {

Dataset line(std::vector<double> xs) {
  std::vector<double> y(xs.size(), 0.0);
  const std::size_t n = xs.size();
  return Dataset(Matrix(n, 1, std::move(xs)), std::move(y));
}

std::vector<std::vector<std::uint32_t>> rows(const NeighborTable& t) {
  std::vector<std::vector<std::uint32_t>> out;
  for (std::size_t i = 0; i < t.size(); ++i) out.emplace_back(t.row(i).begin(), t.row(i).end());
  return out;
}

// Integer grid with duplicated points: plenty of exact distance ties.
Dataset tie_heavy(std::size_t side, std::size_t d, std::uint64_t seed) {
  std::vector<double> pts;
  std::size_t n = 1;
  for (std::size_t j = 0; j < d; ++j) n *= side;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rest = i;
    for (std::size_t j = 0; j < d; ++j) {
      pts.push_back(static_cast<double>(rest % side));
      rest /= side;
    }
  }
  // Duplicate a few points.
  for (std::size_t r = 0; r < 5; ++r) {
    const std::size_t src = (seed * 7 + r * 13) % n;
    for (std::size_t j = 0; j < d; ++j) pts.push_back(pts[src * d + j]);
    ++n;
  }
  return Dataset(Matrix(n, d, std::move(pts)), std::vector<double>(n, 0.0));
}

}  // namespace

TEST_CASE("three points on a line") {
  const NeighborTable t = build_table(line({0, 1, 3}), 2, TieRule{});
  CHECK(rows(t) == std::vector<std::vector<std::uint32_t>>{{1, 2}, {0, 2}, {1, 0}});
  CHECK(std::vector<double>(t.distances(0).begin(), t.distances(0).end()) ==
        std::vector<double>{1, 3});
  CHECK(std::vector<double>(t.distances(1).begin(), t.distances(1).end()) ==
        std::vector<double>{1, 2});
  CHECK(std::vector<double>(t.distances(2).begin(), t.distances(2).end()) ==
        std::vector<double>{2, 3});
  CHECK(t.dump_row(2) == R"({"row":3,"neighbors":[2,1],"distances":[2.0,3.0]})");
}

TEST_CASE("two points") {
  const NeighborTable t = build_table(line({5, -2}), 1, TieRule{});
  CHECK(rows(t) == std::vector<std::vector<std::uint32_t>>{{1}, {0}});
}

TEST_CASE("k_max range is enforced") {
  const Dataset d = line({0, 1, 3});
  CHECK_THROWS_AS(build_table(d, 0, TieRule{}), Error);
  CHECK_THROWS_AS(build_table(d, 3, TieRule{}), Error);
}

TEST_CASE("seeded ties are uniform over seeds") {
  // Unit square; from corner 0 the candidates 1 and 2 are tied at distance 1.
  const Dataset square(Matrix(4, 2, {0, 0, 1, 0, 0, 1, 1, 1}), {0, 0, 0, 0});
  const int seeds = 10000;
  int first = 0;
  for (int s = 0; s < seeds; ++s) {
    const NeighborTable t = build_table(square, 1, TieRule{static_cast<std::uint64_t>(s)});
    CHECK((t.row(0)[0] == 1 || t.row(0)[0] == 2));
    first += t.row(0)[0] == 1;
  }
  const double freq = static_cast<double>(first) / seeds;
  CHECK(std::abs(freq - 0.5) < 0.02);
  const double expected = seeds / 2.0;
  const double stat = (first - expected) * (first - expected) / expected +
                      (seeds - first - expected) * (seeds - first - expected) / expected;
  CHECK(oracle::chi_square_sf(stat, 1.0) > 0.001);
}

TEST_CASE("seeded ties: three-way block is a uniform permutation") {
  // Center point with three neighbors at distance 1.
  const Dataset star(Matrix(4, 2, {0, 0, 1, 0, -1, 0, 0, 1}), {0, 0, 0, 0});
  std::map<std::vector<std::uint32_t>, int> counts;
  const int seeds = 6000;
  for (int s = 0; s < seeds; ++s) {
    const NeighborTable t = build_table(star, 3, TieRule{static_cast<std::uint64_t>(s) + 1000});
    counts[{t.row(0).begin(), t.row(0).end()}]++;
  }
  REQUIRE(counts.size() == 6);
  double stat = 0.0;
  for (auto& [perm, c] : counts) stat += (c - 1000.0) * (c - 1000.0) / 1000.0;
  CHECK(oracle::chi_square_sf(stat, 5.0) > 0.001);
}

TEST_CASE("query neighbors") {
  const Dataset d = line({0, 1, 3});
  const std::vector<double> x{2.4};
  CHECK(query_neighbors(d, x, 1, TieRule{}) == std::vector<std::size_t>{2});
  const std::vector<double> on_point{1.0};
  CHECK(query_neighbors(d, on_point, 1, TieRule{}) == std::vector<std::size_t>{1});
  CHECK(query_neighbors(d, x, 3, TieRule{}) == std::vector<std::size_t>{2, 1, 0});
  CHECK_THROWS_AS(query_neighbors(d, x, 0, TieRule{}), Error);
  CHECK_THROWS_AS(query_neighbors(d, x, 4, TieRule{}), Error);
  const std::vector<double> wrong_dim{1.0, 2.0};
  CHECK_THROWS_AS(query_neighbors(d, wrong_dim, 1, TieRule{}), Error);
}

TEST_CASE("in-degree") {
  const NeighborTable t = build_table(line({0, 1, 3}), 2, TieRule{});
  CHECK(in_degree(t, 1) == std::vector<std::size_t>{1, 2, 0});
  CHECK_THROWS_AS(in_degree(t, 3), Error);

  std::vector<double> xs(50);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const NeighborTable eq = build_table(line(xs), 1, TieRule{s});
    const auto deg = in_degree(eq, 1);
    CHECK(*std::max_element(deg.begin(), deg.end()) <= 2);
  }

  const Dataset rnd = oracle::random_dataset(120, 2, 5);
  const NeighborTable rt = build_table(rnd, 30, TieRule{});
  for (std::size_t k : {1, 7, 30}) {
    const auto deg = in_degree(rt, k);
    std::size_t total = 0;
    for (auto c : deg) total += c;
    CHECK(total == rnd.size() * k);
  }
}

TEST_CASE("table invariants and naive-oracle equality on random data") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const std::size_t n = 2 + (seed * 37) % 199;
    const std::size_t d = 1 + seed % 3;
    const Dataset data = oracle::random_dataset(n, d, seed);
    const std::size_t k_max = n - 1;
    for (auto mode : {TieMode::index_order, TieMode::seeded_uniform}) {
      const TieRule tie{seed, mode};
      const NeighborTable t = build_table(data, k_max, tie);
      CHECK(t == reference::naive_table(data, k_max, tie));
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = t.row(i);
        CHECK(std::find(r.begin(), r.end(), i) == r.end());
        CHECK(std::set<std::uint32_t>(r.begin(), r.end()).size() == k_max);
        CHECK(std::is_sorted(t.distances(i).begin(), t.distances(i).end()));
      }
    }
  }
}

TEST_CASE("nestedness across k_max") {
  const Dataset data = oracle::random_dataset(80, 2, 17);
  const NeighborTable big = build_table(data, 79, TieRule{3});
  for (std::size_t k_max : {1, 5, 40}) {
    const NeighborTable small = build_table(data, k_max, TieRule{3});
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(std::equal(small.row(i).begin(), small.row(i).end(), big.row(i).begin()));
    }
  }
}

TEST_CASE("k-d tree agrees exactly with the exhaustive backend") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Dataset data = oracle::random_dataset(500 + 97 * seed, 1 + seed % 4, seed);
    for (std::size_t k_max : {1, 10, 64}) {
      for (auto mode : {TieMode::index_order, TieMode::seeded_uniform}) {
        const TieRule tie{seed, mode};
        CHECK(build_table(data, k_max, tie, Backend::kd_tree) ==
              build_table(data, k_max, tie, Backend::exhaustive));
      }
    }
  }
  SUBCASE("with exact ties and duplicate points") {
    for (std::size_t d : {1, 2, 3}) {
      const Dataset data = tie_heavy(d == 1 ? 300 : (d == 2 ? 17 : 7), d, d);
      for (std::size_t k_max : {1, 4, 12}) {
        for (auto mode : {TieMode::index_order, TieMode::seeded_uniform}) {
          const TieRule tie{7, mode};
          CHECK(build_table(data, k_max, tie, Backend::kd_tree) ==
                build_table(data, k_max, tie, Backend::exhaustive));
        }
      }
    }
  }
}

TEST_CASE("automatic backend choice") {
  CHECK(choose_backend(100, 10) == Backend::exhaustive);
  CHECK(choose_backend(4096, 4095) == Backend::exhaustive);
  CHECK(choose_backend(4096, 100) == Backend::kd_tree);
}

TEST_CASE("table is identical for every thread count") {
  const Dataset data = oracle::random_dataset(700, 3, 1);
  NeighborTable base = [&] {
    ThreadScope one(1);
    return build_table(data, 50, TieRule{9});
  }();
  for (int threads : {2, 8}) {
    ThreadScope scope(threads);
    CHECK(build_table(data, 50, TieRule{9}) == base);
  }
}

// Max in-degree / k stays bounded as n grows for uniform designs.
TEST_CASE("in-degree boundedness") {
  for (std::size_t d : {1, 2, 3}) {
    std::vector<double> avg;
    for (std::size_t n : {100, 400, 1600}) {
      const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      double sum = 0.0;
      for (std::uint64_t s = 0; s < 20; ++s) {
        SyntheticSpec spec{.n = n, .d = d, .noise_sd = 0.0, .seed = 1000 + s};
        const LabeledDataset ld = generate_synthetic(spec);
        const auto deg = in_degree(build_table(ld.data, k, TieRule{s}), k);
        sum += static_cast<double>(*std::max_element(deg.begin(), deg.end())) / k;
      }
      avg.push_back(sum / 20.0);
    }
    INFO("d = " << d << " averages " << avg[0] << ", " << avg[1] << ", " << avg[2]);
    CHECK(avg[1] <= 1.5 * avg[0]);
    CHECK(avg[2] <= 1.5 * avg[0]);
  }
}
