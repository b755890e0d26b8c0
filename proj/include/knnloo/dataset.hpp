#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace knnloo {

/// Dense row-major matrix of finite reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// n points in d dimensions with one response each. Invariants (checked on
/// construction): n >= 2, d >= 1, every value finite.
class Dataset {
 public:
  Dataset(Matrix points, std::vector<double> responses);

  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  std::span<const double> point(std::size_t i) const { return points_.row(i); }
  const std::vector<double>& responses() const noexcept { return responses_; }

  /// Same design, new responses.
  Dataset with_responses(std::vector<double> responses) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Matrix points_;
  std::vector<double> responses_;
};

/// 64-bit FNV-1a over the shape and the IEEE bytes of points and responses.
std::uint64_t checksum(const Dataset& data);

enum class FunctionId { linear, lipschitz_sine, constant };
enum class NoiseFamily { gaussian, uniform, rademacher };
enum class Design { grid, uniform_random };

std::string_view to_string(FunctionId id);
std::string_view to_string(NoiseFamily family);
std::string_view to_string(Design design);
FunctionId parse_function_id(std::string_view name);
/// Rejects anything that is not one of the sub-Gaussian built-ins.
NoiseFamily parse_noise_family(std::string_view name);
Design parse_design(std::string_view name);

struct SyntheticSpec {
  std::size_t n = 100;
  std::size_t d = 1;
  FunctionId function = FunctionId::lipschitz_sine;
  double constant_value = 1.0;  // only read by FunctionId::constant
  double noise_sd = 1.0;
  NoiseFamily noise_family = NoiseFamily::gaussian;
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  Design design = Design::uniform_random;
  std::uint64_t seed = 42;

  /// Throws validation_error when the spec cannot be generated.
  void validate() const;
};

/// Dataset with the noiseless regression values it was drawn around.
struct LabeledDataset {
  Dataset data;
  std::vector<double> mu;
  double noise_sd = 0.0;
  NoiseFamily noise_family = NoiseFamily::gaussian;

  std::vector<double> noise() const;
};

double evaluate(FunctionId id, std::span<const double> x, double constant_value = 1.0);

/// Design points only; a pure function of (n, d, domain, design, seed).
Matrix generate_design(const SyntheticSpec& spec);

/// n i.i.d. mean-zero draws with standard deviation sd.
std::vector<double> draw_noise(NoiseFamily family, double sd, std::size_t n,
                               std::uint64_t seed);

/// Fixed design plus one noise draw, reproducible bit for bit from spec.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

/// Responses plus noise seeded by `noise_seed`, on the same frozen design.
LabeledDataset redraw_noise(const LabeledDataset& labeled, std::uint64_t noise_seed);

// CSV ---------------------------------------------------------------------

/// Column selector: non-negative values index from the left, negative ones
/// from the right (-1 is the last column).
struct ColumnSelector {
  long index = -1;
};

Dataset load_csv(const std::filesystem::path& path, bool has_header,
                 ColumnSelector response = {});
Dataset parse_csv(std::string_view text, bool has_header, ColumnSelector response = {},
                  std::string_view source = "<memory>");

/// Every column is a coordinate (query files).
Matrix load_matrix_csv(const std::filesystem::path& path, bool has_header);
Matrix parse_matrix_csv(std::string_view text, bool has_header,
                        std::string_view source = "<memory>");

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Writes `x1..xd,y` with a header row.
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// CSV plus `<path>.json` holding {n, d, function_id, noise_sd, noise_family, seed}.
void save_labeled(const LabeledDataset& labeled, const SyntheticSpec& spec,
                  const std::filesystem::path& csv_path);

}  // namespace knnloo
