#include "oracle.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <random>

namespace oracle {

namespace {

McResult summarize(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(v.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

Eigen::MatrixXd as_eigen(const std::vector<double>& a, std::size_t n) {
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = a[i * n + j];
  return m;
}

}  // namespace

knnloo::Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> pts(n * d);
  for (double& v : pts) v = unif(rng);
  std::vector<double> y(n);
  for (double& v : y) v = normal(rng);
  return knnloo::Dataset(knnloo::Matrix(n, d, std::move(pts)), std::move(y));
}

double dense_max_eigenvalue(const std::vector<double>& a, std::size_t n) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(as_eigen(a, n));
  return solver.eigenvalues().maxCoeff();
}

double dense_min_eigenvalue(const std::vector<double>& a, std::size_t n) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(as_eigen(a, n));
  return solver.eigenvalues().minCoeff();
}

McResult monte_carlo_mse(const knnloo::LabeledDataset& labeled, const knnloo::NeighborTable& table,
                         std::size_t k, std::size_t draws, std::uint64_t seed) {
  const std::size_t n = labeled.mu.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, labeled.noise_sd);
  std::vector<double> y(n), values(draws);
  for (std::size_t t = 0; t < draws; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = labeled.mu[i] + (labeled.noise_sd > 0.0 ? normal(rng) : 0.0);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = 0.0;
      for (auto j : table.neighbors(i, k)) m += y[j];
      m /= static_cast<double>(k);
      sum += (labeled.mu[i] - m) * (labeled.mu[i] - m);
    }
    values[t] = sum / static_cast<double>(n);
  }
  return summarize(values);
}

McResult monte_carlo_noise_quadratic(const std::vector<double>& a, std::size_t n,
                                     double sigma_sq, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_sq));
  const Eigen::MatrixXd m = as_eigen(a, n);
  Eigen::VectorXd eps(n);
  std::vector<double> values(draws);
  for (std::size_t t = 0; t < draws; ++t) {
    for (std::size_t i = 0; i < n; ++i) eps(i) = normal(rng);
    values[t] = eps.dot(m * eps);
  }
  return summarize(values);
}

double chi_square_sf(double stat, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace oracle
