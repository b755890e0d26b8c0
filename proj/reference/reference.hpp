#pragma once

// Serial, straightforward versions of the parallel kernels. They share no
// code paths with the library beyond the data types and TieRule::key, and
// exist only so tests and benchmarks have something to compare against.

#include <cstddef>
#include <vector>

#include "knnloo/dataset.hpp"
#include "knnloo/neighbors.hpp"

namespace knnloo::reference {

/// Full pairwise distance matrix, then a full sort of every row.
NeighborTable naive_table(const Dataset& data, std::size_t k_max, const TieRule& tie);

/// f(k) recomputed from scratch for each k, rows summed in ascending order.
std::vector<double> naive_curve(const Dataset& data, const NeighborTable& table);

/// Dense n x n matrices, row-major.
std::vector<double> dense_b(const NeighborTable& table, std::size_t k);
std::vector<double> dense_a(const NeighborTable& table, std::size_t k);

/// y^T A y with the dense A.
double dense_quadratic_form(const std::vector<double>& a, const std::vector<double>& y);

/// (1/n) sum_i (mu_i - mean_{N_k(i)} mu)^2 + sigma^2 / k, per k from scratch.
std::vector<double> naive_exact_mse(const LabeledDataset& labeled, const NeighborTable& table);

}  // namespace knnloo::reference
