#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "knnloo/dataset.hpp"
#include "knnloo/neighbors.hpp"

namespace knnloo {

/// Compressed sparse rows, columns ascending within each row.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  std::size_t nonzeros() const noexcept { return vals.size(); }
  /// Stored value or 0.
  double entry(std::size_t i, std::size_t j) const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> multiply_transpose(std::span<const double> x) const;
};

/// The LOOCV residual operator for one k: unit diagonal, -1/k on each of the
/// k neighbor positions of a row, so (B y)_i = y_i - mean of y over N_k(i).
class SelectorMatrix {
 public:
  SelectorMatrix(std::size_t k, CsrMatrix b) : k_(k), b_(std::move(b)) {}

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return b_.n; }
  const CsrMatrix& csr() const noexcept { return b_; }

  std::vector<double> apply(std::span<const double> x) const { return b_.multiply(x); }
  std::vector<double> apply_transpose(std::span<const double> x) const {
    return b_.multiply_transpose(x);
  }

 private:
  std::size_t k_;
  CsrMatrix b_;
};

/// A = B^T B / n, stored with both triangles; a_ij and a_ji are computed by
/// the same products in the same order, so symmetry is exact.
class GramMatrix {
 public:
  explicit GramMatrix(CsrMatrix a) : a_(std::move(a)) {}

  std::size_t size() const noexcept { return a_.n; }
  const CsrMatrix& csr() const noexcept { return a_; }
  double entry(std::size_t i, std::size_t j) const { return a_.entry(i, j); }
  std::vector<double> apply(std::span<const double> x) const { return a_.multiply(x); }
  double trace() const;

 private:
  CsrMatrix a_;
};

SelectorMatrix build_b(const NeighborTable& table, std::size_t k);
GramMatrix build_a(const SelectorMatrix& b);

/// Sum of squares of the stored entries of A.
double frobenius_sq(const GramMatrix& a);

/// Summary of the row inner products <b_i, b_j>, i.e. of B B^T. Its nonzero
/// spectrum equals that of B^T B, so frobenius_sq / n^2 == ||A||_F^2.
struct RowOverlap {
  double frobenius_sq = 0.0;           // sum_ij <b_i,b_j>^2 / n^2
  double max_offdiag_abs = 0.0;        // max_{i != j} |<b_i, b_j>|
  std::size_t max_overlap_count = 0;   // max_i |{j : <b_i, b_j> != 0}|
};
RowOverlap row_overlap(const SelectorMatrix& b);

struct PowerIterationResult {
  double value = 0.0;
  std::size_t iterations = 0;
  double min_rayleigh = 0.0;  // smallest Rayleigh quotient seen; >= 0 for PSD input
  double residual = 0.0;      // ||A x - value x|| for the final unit x
};

inline constexpr std::size_t kPowerIterationCap = 10000;

/// Largest eigenvalue of a symmetric PSD operator by power iteration from a
/// fixed pseudo-random start, stopping once the Rayleigh quotient changes by
/// at most tol relative. Throws resource_error (with the residual) when the
/// cap is hit.
PowerIterationResult power_iteration(
    std::size_t n, const std::function<std::vector<double>(std::span<const double>)>& apply,
    double tol = 1e-8, std::size_t max_iter = kPowerIterationCap);

double two_norm(const GramMatrix& a, double tol = 1e-8);
/// ||B^T B / n||_2 through x -> B^T (B x) / n, without forming A.
double two_norm(const SelectorMatrix& b, double tol = 1e-8);

/// y^T A y
double quadratic_form(const GramMatrix& a, std::span<const double> y);
/// ||B y||^2 / n
double quadratic_form(const SelectorMatrix& b, std::span<const double> y);

/// E[eps^T A eps] = (1 + 1/k) sigma^2.
double expected_quadratic_noise(std::size_t k, double sigma_sq);

struct SpectralReport {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  double frobenius_sq = 0.0;
  double two_norm = 0.0;
  double trace = 0.0;
  std::size_t max_in_degree = 0;
  std::size_t max_overlap_count = 0;

  double n_frobenius_sq() const { return static_cast<double>(n) * frobenius_sq; }
  double n_two_norm() const { return static_cast<double>(n) * two_norm; }
  std::string to_json() const;
};

SpectralReport spectral_report(const Dataset& data, const NeighborTable& table, std::size_t k,
                               double tol = 1e-8);

}  // namespace knnloo
