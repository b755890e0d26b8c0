#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "knnloo/dataset.hpp"
#include "knnloo/neighbors.hpp"

namespace knnloo {

/// Closed-form MSE(k) = (1/n) sum_i (mu_i - mean of mu over N_k(i))^2 + sigma^2/k.
/// The estimator's residual splits into a deterministic bias and the mean of
/// k independent noise terms whose cross terms vanish in expectation.
double exact_mse(const LabeledDataset& labeled, const NeighborTable& table, std::size_t k);

/// exact_mse for every k = 1..k_max (entry k-1), bit-identical to exact_mse().
std::vector<double> exact_mse_curve(const LabeledDataset& labeled, const NeighborTable& table);

/// Smallest minimizer of exact_mse over 1..k_max.
std::size_t k_star(const LabeledDataset& labeled, const NeighborTable& table);

/// Mean and standard error of a sample, summed in index order.
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};
SampleStats sample_stats(const std::vector<double>& values);

/// Monte Carlo check of E[f(k)] = sigma^2 + MSE(k).
struct DecompositionCheck {
  double mc_mean_f = 0.0;
  double std_error = 0.0;
  double target = 0.0;
  double z_score = 0.0;
};

/// Redraws the noise `redraws` times (each draw seeded by (seed, r)) and
/// averages f(k) over the redraws.
DecompositionCheck decomposition_check(const LabeledDataset& labeled, const NeighborTable& table,
                                       std::size_t k, std::size_t redraws,
                                       std::uint64_t seed = 42);

enum class KMaxRule { full, sqrt, user };

struct ExperimentSpec {
  SyntheticSpec data;  // n and seed are overridden per grid point
  std::vector<std::size_t> n_grid;
  std::size_t replicates = 1;
  KMaxRule k_max_rule = KMaxRule::full;
  std::size_t user_k_max = 0;
  std::uint64_t master_seed = 42;
  /// Largest neighbor table (bytes) one grid point may materialize.
  std::size_t max_table_bytes = std::size_t{1} << 31;

  void validate() const;
};

/// full: n-1 up to n = 1600, then the sqrt rule; sqrt: min(n-1, ceil(n^(2/3)));
/// user: min(n-1, user_k_max).
std::size_t k_max_for(const ExperimentSpec& spec, std::size_t n);

ExperimentSpec parse_experiment_spec(const std::string& json_text);

struct Replicate {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::size_t k_star = 0;
  std::size_t k_tilde = 0;
  double mse_star = 0.0;
  double mse_tilde = 0.0;
  double gap = 0.0;  // mse_tilde - mse_star, >= 0
};

struct GapSummary {
  std::size_t n = 0;
  std::size_t k_max = 0;
  std::size_t replicates = 0;
  double median_gap = 0.0;
  double mean_gap = 0.0;
  double median_ratio = 0.0;           // median of mse_tilde / mse_star
  double median_scaled_gap = 0.0;      // median of gap * sqrt(n / log n)
  double median_mse_star = 0.0;
};

struct GapReport {
  std::vector<Replicate> replicates;
  std::vector<GapSummary> summaries;
  bool partial = false;
  std::vector<std::string> notes;

  std::string to_json(const ExperimentSpec& spec) const;
  std::string to_csv() const;
};

double median(std::vector<double> values);

/// Per n: one frozen design from (master_seed, n), then `replicates` fresh
/// noise draws seeded by (master_seed, n, r). Replicates run in parallel and
/// are merged in index order.
GapReport gap_experiment(const ExperimentSpec& spec);

struct AdaptivityReport {
  GapReport first;
  GapReport second;
  std::vector<double> median_gap_ratio;  // first / second, per n

  std::string to_json(const ExperimentSpec& a, const ExperimentSpec& b) const;
};

/// Runs the same experiment for two regression functions. The specs must
/// agree in everything but the function.
AdaptivityReport adaptivity_probe(const ExperimentSpec& first, const ExperimentSpec& second);

}  // namespace knnloo
