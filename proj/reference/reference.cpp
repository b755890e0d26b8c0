#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace knnloo::reference {

NeighborTable naive_table(const Dataset& data, std::size_t k_max, const TieRule& tie) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  std::vector<double> dist_sq(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = data.points()(i, c) - data.points()(j, c);
        s += diff * diff;
      }
      dist_sq[i * n + j] = s;
    }
  }
  std::vector<std::uint32_t> order;
  std::vector<double> distances;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::tuple<double, std::uint64_t, std::uint32_t>> row;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto idx = static_cast<std::uint32_t>(j);
      row.emplace_back(dist_sq[i * n + j], tie.key(i, idx), idx);
    }
    std::sort(row.begin(), row.end());
    for (std::size_t r = 0; r < k_max; ++r) {
      order.push_back(std::get<2>(row[r]));
      distances.push_back(std::sqrt(std::get<0>(row[r])));
    }
  }
  return NeighborTable(n, k_max, tie, std::move(order), std::move(distances));
}

std::vector<double> naive_curve(const Dataset& data, const NeighborTable& table) {
  const auto& y = data.responses();
  const std::size_t n = data.size();
  std::vector<double> f(table.k_max());
  for (std::size_t k = 1; k <= table.k_max(); ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += y[table.row(i)[r]];
      const double resid = y[i] - s / static_cast<double>(k);
      sum += resid * resid;
    }
    f[k - 1] = sum / static_cast<double>(n);
  }
  return f;
}

std::vector<double> dense_b(const NeighborTable& table, std::size_t k) {
  const std::size_t n = table.size();
  std::vector<double> b(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    b[i * n + i] = 1.0;
    for (std::size_t r = 0; r < k; ++r) b[i * n + table.row(i)[r]] = -1.0 / static_cast<double>(k);
  }
  return b;
}

std::vector<double> dense_a(const NeighborTable& table, std::size_t k) {
  const std::size_t n = table.size();
  const auto b = dense_b(table, k);
  std::vector<double> a(n * n, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += b[r * n + p] * b[r * n + q];
      a[p * n + q] = s / static_cast<double>(n);
    }
  }
  return a;
}

double dense_quadratic_form(const std::vector<double>& a, const std::vector<double>& y) {
  const std::size_t n = y.size();
  double s = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) s += y[p] * a[p * n + q] * y[q];
  }
  return s;
}

std::vector<double> naive_exact_mse(const LabeledDataset& labeled, const NeighborTable& table) {
  const auto& mu = labeled.mu;
  const std::size_t n = mu.size();
  std::vector<double> out(table.k_max());
  for (std::size_t k = 1; k <= table.k_max(); ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += mu[table.row(i)[r]];
      const double resid = mu[i] - s / static_cast<double>(k);
      sum += resid * resid;
    }
    out[k - 1] = sum / static_cast<double>(n) +
                 labeled.noise_sd * labeled.noise_sd / static_cast<double>(k);
  }
  return out;
}

}  // namespace knnloo::reference
