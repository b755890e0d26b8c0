#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knnloo/dataset.hpp"
#include "knnloo/neighbors.hpp"

namespace knnloo {

/// f[k-1] = (1/n) sum_i (y_i - mean of y over N_k(i))^2 for k = 1..k_max,
/// and its smallest minimizer.
struct LoocvCurve {
  std::vector<double> f;
  std::size_t k_tilde = 1;

  std::size_t k_max() const noexcept { return f.size(); }
  double at(std::size_t k) const { return f.at(k - 1); }

  friend bool operator==(const LoocvCurve&, const LoocvCurve&) = default;
};

/// Smallest k attaining min f (f is 1-based in k, 0-based in storage).
std::size_t select_k(std::span<const double> f);

/// Core row kernel: out[k-1] = (target - (sum of the first k values[neighbors]) / k)^2.
/// The running sum adds neighbors in rank order starting from 0.
void row_residuals_sq(double target, std::span<const double> values,
                      std::span<const std::uint32_t> neighbors, std::span<double> out);
void row_residuals_sq(double target, std::span<const double> values,
                      std::span<const Candidate> neighbors, std::span<double> out);

/// Averages per-row vectors over rows: result[k] = (sum_i row_i[k]) / n with
/// the sum taken in ascending i. `fill(i, out)` runs in parallel over rows
/// and must write only `out`; the reduction is serial, so the result does not
/// depend on the thread count.
using RowFill = std::function<void(std::size_t row, std::span<double> out)>;
std::vector<double> average_rows(std::size_t n, std::size_t width, const RowFill& fill);

/// Leave-one-out k-NN estimates of every training response.
std::vector<double> loo_estimates(const Dataset& data, const NeighborTable& table, std::size_t k);

/// All-k LOOCV curve from a materialized table, O(n * k_max).
LoocvCurve loocv_curve(const Dataset& data, const NeighborTable& table);

/// Same curve without materializing the table: neighbor rows are computed on
/// the fly, so memory stays O(threads * n + block * k_max).
LoocvCurve loocv_curve(const Dataset& data, std::size_t k_max, const TieRule& tie,
                       Backend backend = Backend::automatic);

/// Largest k_max materialized by default; beyond it fit() falls back to
/// ceil(n^(2/3)) and reports a warning.
inline constexpr std::size_t kFullRangeLimit = 4096;

std::size_t default_k_max(std::size_t n);

struct FitOptions {
  std::optional<std::size_t> k_max;
  TieRule tie;
  std::optional<std::size_t> k_override;
};

struct FittedModel {
  Dataset data;
  std::size_t k = 1;
  LoocvCurve curve;
  TieRule tie;
  std::optional<std::size_t> k_override;
  std::optional<std::string> warning;

  std::size_t k_max() const noexcept { return curve.k_max(); }
};

FittedModel fit(const Dataset& data, const FitOptions& options = {});

/// Mean response over the model.k nearest training points of each query row.
std::vector<double> predict(const FittedModel& model, const Matrix& queries);

// Persistence ---------------------------------------------------------------

inline constexpr int kFormatVersion = 1;

struct ModelManifest {
  std::size_t k = 1;
  std::size_t k_max = 1;
  TieRule tie;
  std::optional<std::size_t> k_override;
  std::vector<double> curve;
  std::uint64_t data_checksum = 0;
  std::string training_csv;
  bool has_header = false;
  long response_column = -1;
};

std::string manifest_json(const FittedModel& model, const std::string& training_csv,
                          bool has_header, long response_column);
ModelManifest parse_manifest(const std::string& text);

/// Rebuilds a model from its manifest and the training data, refusing data
/// whose checksum does not match.
FittedModel restore_model(const ModelManifest& manifest, const Dataset& data);

}  // namespace knnloo
