#include "knnloo/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "knnloo/error.hpp"
#include "knnloo/regress.hpp"

namespace knnloo {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Column view of a CSR matrix: for column c, the (row, value) pairs in
// ascending row order.
struct ColumnIndex {
  std::vector<std::size_t> ptr;
  std::vector<std::uint32_t> rows;
  std::vector<double> vals;

  explicit ColumnIndex(const CsrMatrix& m) : ptr(m.n + 1, 0), rows(m.nonzeros()), vals(m.nonzeros()) {
    for (auto c : m.cols) ++ptr[c + 1];
    for (std::size_t c = 0; c < m.n; ++c) ptr[c + 1] += ptr[c];
    std::vector<std::size_t> fill(ptr.begin(), ptr.end() - 1);
    for (std::size_t r = 0; r < m.n; ++r) {
      for (std::size_t p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p) {
        const std::size_t slot = fill[m.cols[p]]++;
        rows[slot] = static_cast<std::uint32_t>(r);
        vals[slot] = m.vals[p];
      }
    }
  }

  CsrMatrix as_transpose(std::size_t n) const { return CsrMatrix{n, ptr, rows, vals}; }
};

// Sparse accumulator: dense values plus the list of touched slots.
struct Accumulator {
  std::vector<double> value;
  std::vector<char> used;
  std::vector<std::uint32_t> touched;

  explicit Accumulator(std::size_t n) : value(n, 0.0), used(n, 0) {}

  void add(std::uint32_t j, double v) {
    if (!used[j]) {
      used[j] = 1;
      touched.push_back(j);
    }
    value[j] += v;
  }

  void reset() {
    for (auto j : touched) {
      value[j] = 0.0;
      used[j] = 0;
    }
    touched.clear();
  }
};

}  // namespace

double CsrMatrix::entry(std::size_t i, std::size_t j) const {
  const auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return 0.0;
  return vals[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  if (x.size() != n) throw validation_error("vector length does not match matrix size");
  std::vector<double> out(n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    double s = 0.0;
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += vals[p] * x[cols[p]];
    out[i] = s;
  }
  return out;
}

std::vector<double> CsrMatrix::multiply_transpose(std::span<const double> x) const {
  if (x.size() != n) throw validation_error("vector length does not match matrix size");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out[cols[p]] += vals[p] * x[i];
  }
  return out;
}

double GramMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < a_.n; ++i) t += a_.entry(i, i);
  return t;
}

SelectorMatrix build_b(const NeighborTable& table, std::size_t k) {
  if (k < 1 || k > table.k_max()) {
    throw validation_error("k must lie in [1, k_max] = [1, " + std::to_string(table.k_max()) +
                           "], got " + std::to_string(k));
  }
  const std::size_t n = table.size();
  const double off = -1.0 / static_cast<double>(k);
  CsrMatrix b;
  b.n = n;
  b.row_ptr.resize(n + 1);
  b.cols.resize(n * (k + 1));
  b.vals.resize(n * (k + 1));
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const std::size_t base = i * (k + 1);
    b.row_ptr[i] = base;
    std::vector<std::uint32_t> cols(table.neighbors(i, k).begin(), table.neighbors(i, k).end());
    cols.push_back(static_cast<std::uint32_t>(i));
    std::sort(cols.begin(), cols.end());
    for (std::size_t p = 0; p <= k; ++p) {
      b.cols[base + p] = cols[p];
      b.vals[base + p] = cols[p] == i ? 1.0 : off;
    }
  }
  b.row_ptr[n] = n * (k + 1);
  return SelectorMatrix(k, std::move(b));
}

GramMatrix build_a(const SelectorMatrix& selector) {
  const CsrMatrix& b = selector.csr();
  const std::size_t n = b.n;
  const ColumnIndex by_col(b);
  const double scale = static_cast<double>(n);
  std::vector<std::vector<std::uint32_t>> row_cols(n);
  std::vector<std::vector<double>> row_vals(n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    Accumulator acc(n);
#pragma omp for schedule(dynamic, 32)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto p = static_cast<std::size_t>(r);
      // a_pq = sum over rows s of B containing p of b_sp * b_sq, s ascending.
      for (std::size_t e = by_col.ptr[p]; e < by_col.ptr[p + 1]; ++e) {
        const std::size_t s = by_col.rows[e];
        const double bsp = by_col.vals[e];
        for (std::size_t t = b.row_ptr[s]; t < b.row_ptr[s + 1]; ++t) {
          acc.add(b.cols[t], bsp * b.vals[t]);
        }
      }
      std::sort(acc.touched.begin(), acc.touched.end());
      auto& cols = row_cols[p];
      auto& vals = row_vals[p];
      for (auto q : acc.touched) {
        if (acc.value[q] == 0.0) continue;
        cols.push_back(q);
        vals.push_back(acc.value[q] / scale);
      }
      acc.reset();
    }
  }
  CsrMatrix a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  for (std::size_t p = 0; p < n; ++p) a.row_ptr[p + 1] = a.row_ptr[p] + row_cols[p].size();
  a.cols.reserve(a.row_ptr[n]);
  a.vals.reserve(a.row_ptr[n]);
  for (std::size_t p = 0; p < n; ++p) {
    a.cols.insert(a.cols.end(), row_cols[p].begin(), row_cols[p].end());
    a.vals.insert(a.vals.end(), row_vals[p].begin(), row_vals[p].end());
  }
  return GramMatrix(std::move(a));
}

double frobenius_sq(const GramMatrix& a) {
  double s = 0.0;
  for (double v : a.csr().vals) s += v * v;
  return s;
}

RowOverlap row_overlap(const SelectorMatrix& selector) {
  const CsrMatrix& b = selector.csr();
  const std::size_t n = b.n;
  const ColumnIndex by_col(b);
  std::vector<double> row_sq(n);
  std::vector<double> row_max(n);
  std::vector<std::size_t> row_count(n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    Accumulator acc(n);
#pragma omp for schedule(dynamic, 32)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const auto i = static_cast<std::size_t>(r);
      for (std::size_t t = b.row_ptr[i]; t < b.row_ptr[i + 1]; ++t) {
        const std::size_t c = b.cols[t];
        for (std::size_t e = by_col.ptr[c]; e < by_col.ptr[c + 1]; ++e) {
          acc.add(by_col.rows[e], b.vals[t] * by_col.vals[e]);
        }
      }
      std::sort(acc.touched.begin(), acc.touched.end());
      double sq = 0.0, mx = 0.0;
      std::size_t count = 0;
      for (auto j : acc.touched) {
        const double v = acc.value[j];
        sq += v * v;
        if (v != 0.0) ++count;
        if (j != i) mx = std::max(mx, std::abs(v));
      }
      row_sq[i] = sq;
      row_max[i] = mx;
      row_count[i] = count;
      acc.reset();
    }
  }
  RowOverlap out;
  for (std::size_t i = 0; i < n; ++i) {
    out.frobenius_sq += row_sq[i];
    out.max_offdiag_abs = std::max(out.max_offdiag_abs, row_max[i]);
    out.max_overlap_count = std::max(out.max_overlap_count, row_count[i]);
  }
  out.frobenius_sq /= static_cast<double>(n) * static_cast<double>(n);
  return out;
}

PowerIterationResult power_iteration(
    std::size_t n, const std::function<std::vector<double>(std::span<const double>)>& apply,
    double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw validation_error("power iteration tolerance must be positive");
  // The all-ones vector spans the kernel of B, so start elsewhere.
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<double> x(n);
  for (double& v : x) v = unif(rng);
  const double norm0 = std::sqrt(dot(x, x));
  for (double& v : x) v /= norm0;

  PowerIterationResult result;
  result.min_rayleigh = std::numeric_limits<double>::infinity();
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    std::vector<double> y = apply(x);
    const double rayleigh = dot(x, y);
    result.min_rayleigh = std::min(result.min_rayleigh, rayleigh);
    result.value = rayleigh;
    result.iterations = it;
    const double norm = std::sqrt(dot(y, y));
    double resid_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - rayleigh * x[i];
      resid_sq += r * r;
    }
    result.residual = std::sqrt(resid_sq);
    if (norm == 0.0) return result;  // zero operator
    if (std::abs(rayleigh - previous) <= tol * std::abs(rayleigh)) return result;
    previous = rayleigh;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
  }
  throw resource_error("power iteration did not converge in " + std::to_string(max_iter) +
                       " iterations (estimate " + format_double(result.value) + ", residual " +
                       format_double(result.residual) + ")");
}

double two_norm(const GramMatrix& a, double tol) {
  return power_iteration(
             a.size(), [&a](std::span<const double> x) { return a.apply(x); }, tol)
      .value;
}

double two_norm(const SelectorMatrix& b, double tol) {
  const CsrMatrix bt = ColumnIndex(b.csr()).as_transpose(b.size());
  const double scale = static_cast<double>(b.size());
  return power_iteration(
             b.size(),
             [&](std::span<const double> x) {
               std::vector<double> y = bt.multiply(b.apply(x));
               for (double& v : y) v /= scale;
               return y;
             },
             tol)
      .value;
}

double quadratic_form(const GramMatrix& a, std::span<const double> y) {
  if (y.size() != a.size()) throw validation_error("vector length does not match matrix size");
  return dot(y, a.apply(y));
}

double quadratic_form(const SelectorMatrix& b, std::span<const double> y) {
  if (y.size() != b.size()) throw validation_error("vector length does not match matrix size");
  const std::vector<double> r = b.apply(y);
  return dot(r, r) / static_cast<double>(b.size());
}

double expected_quadratic_noise(std::size_t k, double sigma_sq) {
  if (k < 1) throw validation_error("k must be at least 1");
  if (!(sigma_sq >= 0.0)) throw validation_error("sigma^2 must be non-negative");
  return (1.0 + 1.0 / static_cast<double>(k)) * sigma_sq;
}

std::string SpectralReport::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "knnloo-spectral";
  j["n"] = n;
  j["d"] = d;
  j["k"] = k;
  j["frobenius_sq"] = frobenius_sq;
  j["two_norm"] = two_norm;
  j["trace"] = trace;
  j["max_in_degree"] = max_in_degree;
  j["max_overlap_count"] = max_overlap_count;
  j["n_frobenius_sq"] = n_frobenius_sq();
  j["n_two_norm"] = n_two_norm();
  return j.dump(2) + "\n";
}

SpectralReport spectral_report(const Dataset& data, const NeighborTable& table, std::size_t k,
                               double tol) {
  const SelectorMatrix b = build_b(table, k);
  const GramMatrix a = build_a(b);
  SpectralReport report;
  report.n = data.size();
  report.d = data.dim();
  report.k = k;
  report.frobenius_sq = frobenius_sq(a);
  report.two_norm = two_norm(b, tol);
  report.trace = a.trace();
  const auto degree = in_degree(table, k);
  report.max_in_degree = *std::max_element(degree.begin(), degree.end());
  report.max_overlap_count = row_overlap(b).max_overlap_count;
  return report;
}

}  // namespace knnloo
