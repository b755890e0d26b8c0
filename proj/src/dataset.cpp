#include "knnloo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "knnloo/error.hpp"
#include "knnloo/parallel.hpp"

namespace knnloo {

namespace {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cells;
};

Table parse_table(std::string_view text, bool has_header, std::string_view source) {
  Table table;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (!text.empty()) {
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::size_t col = 0;
    while (true) {
      auto comma = line.find(',');
      std::string_view cell = trim(line.substr(0, comma));
      ++col;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw parse_error(std::string(source) + ": row " + std::to_string(line_no) + ", column " +
                          std::to_string(col) + ": not a number: '" + std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw parse_error(std::string(source) + ": row " + std::to_string(line_no) +
                          ", column " + std::to_string(col) + ": non-finite value");
      }
      table.cells.push_back(value);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (table.rows == 0) {
      table.cols = col;
    } else if (col != table.cols) {
      throw parse_error(std::string(source) + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(col) + " columns, expected " +
                        std::to_string(table.cols));
    }
    ++table.rows;
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Smallest K with E[exp(eps^2 / K)] <= 2; informational only.
double subgaussian_constant(NoiseFamily family, double sd) {
  if (sd == 0.0) return 0.0;
  const double var = sd * sd;
  switch (family) {
    case NoiseFamily::gaussian:
      return 8.0 * var / 3.0;
    case NoiseFamily::rademacher:
      return var / std::numbers::ln2;
    case NoiseFamily::uniform: {
      // eps ~ U[-a, a], a = sqrt(3) sd; E[exp(eps^2/K)] = int_0^1 exp(a^2 t^2 / K) dt.
      const double a2 = 3.0 * var;
      auto moment = [a2](double k) {
        constexpr int steps = 2000;
        double sum = 0.0;
        for (int s = 0; s <= steps; ++s) {
          const double t = static_cast<double>(s) / steps;
          const double w = (s == 0 || s == steps) ? 1.0 : (s % 2 ? 4.0 : 2.0);
          sum += w * std::exp(a2 * t * t / k);
        }
        return sum / (3.0 * steps);
      };
      double lo = a2 / 10.0, hi = a2 * 10.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (moment(mid) > 2.0 ? lo : hi) = mid;
      }
      return hi;
    }
  }
  return 0.0;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw validation_error("matrix storage size does not match its shape");
  }
}

Dataset::Dataset(Matrix points, std::vector<double> responses)
    : points_(std::move(points)), responses_(std::move(responses)) {
  if (points_.rows() < 2) throw validation_error("dataset needs at least 2 points");
  if (points_.cols() < 1) throw validation_error("dataset needs at least 1 coordinate");
  if (responses_.size() != points_.rows()) {
    throw validation_error("response count does not match point count");
  }
  if (!all_finite(points_.values())) throw validation_error("non-finite coordinate");
  if (!all_finite(responses_)) throw validation_error("non-finite response");
}

Dataset Dataset::with_responses(std::vector<double> responses) const {
  return Dataset(points_, std::move(responses));
}

std::uint64_t checksum(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t shape[2] = {data.size(), data.dim()};
  feed(shape, sizeof shape);
  feed(data.points().values().data(), data.points().values().size() * sizeof(double));
  feed(data.responses().data(), data.responses().size() * sizeof(double));
  return h;
}

std::string_view to_string(FunctionId id) {
  switch (id) {
    case FunctionId::linear: return "linear";
    case FunctionId::lipschitz_sine: return "lipschitz-sine";
    case FunctionId::constant: return "constant";
  }
  return "?";
}

std::string_view to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::rademacher: return "rademacher-scaled";
  }
  return "?";
}

std::string_view to_string(Design design) {
  switch (design) {
    case Design::grid: return "grid";
    case Design::uniform_random: return "uniform-random";
  }
  return "?";
}

FunctionId parse_function_id(std::string_view name) {
  if (name == "linear") return FunctionId::linear;
  if (name == "lipschitz-sine") return FunctionId::lipschitz_sine;
  if (name == "constant") return FunctionId::constant;
  throw validation_error("unknown function_id '" + std::string(name) +
                         "' (expected linear, lipschitz-sine or constant)");
}

NoiseFamily parse_noise_family(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "uniform") return NoiseFamily::uniform;
  if (name == "rademacher-scaled" || name == "rademacher") return NoiseFamily::rademacher;
  throw validation_error("noise_family '" + std::string(name) +
                         "' is not a supported sub-Gaussian family "
                         "(gaussian, uniform, rademacher-scaled)");
}

Design parse_design(std::string_view name) {
  if (name == "grid") return Design::grid;
  if (name == "uniform-random") return Design::uniform_random;
  throw validation_error("unknown design '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
  if (n < 2) throw validation_error("n must be at least 2");
  if (d < 1) throw validation_error("d must be at least 1");
  if (!std::isfinite(noise_sd) || noise_sd < 0.0) {
    throw validation_error("noise_sd must be finite and non-negative");
  }
  if (!std::isfinite(domain_lo) || !std::isfinite(domain_hi) || !(domain_lo < domain_hi)) {
    throw validation_error("domain must satisfy lo < hi");
  }
  if (!std::isfinite(constant_value)) throw validation_error("constant_value must be finite");
  if (design == Design::grid) {
    const auto side = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d))));
    std::size_t power = 1;
    for (std::size_t j = 0; j < d; ++j) power *= side;
    if (power != n || side < 2) {
      std::size_t lower = std::max<std::size_t>(side, 2);
      while (lower > 2) {
        std::size_t p = 1;
        for (std::size_t j = 0; j < d; ++j) p *= lower;
        if (p <= n) break;
        --lower;
      }
      std::size_t lo_pow = 1, hi_pow = 1;
      for (std::size_t j = 0; j < d; ++j) {
        lo_pow *= lower;
        hi_pow *= lower + 1;
      }
      throw validation_error("grid design needs n to be a perfect " + std::to_string(d) +
                             "-th power; nearest choices are " + std::to_string(lo_pow) +
                             " and " + std::to_string(hi_pow));
    }
  }
}

std::vector<double> LabeledDataset::noise() const {
  std::vector<double> eps(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) eps[i] = data.responses()[i] - mu[i];
  return eps;
}

double evaluate(FunctionId id, std::span<const double> x, double constant_value) {
  double sum = 0.0;
  switch (id) {
    case FunctionId::linear:
      for (double v : x) sum += v;
      return sum;
    case FunctionId::lipschitz_sine:
      for (double v : x) sum += std::sin(std::numbers::pi * v);
      return sum;
    case FunctionId::constant:
      return constant_value;
  }
  return sum;
}

Matrix generate_design(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<double> values(spec.n * spec.d);
  const double lo = spec.domain_lo, hi = spec.domain_hi;
  if (spec.design == Design::grid) {
    const auto side = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(spec.n), 1.0 / static_cast<double>(spec.d))));
    for (std::size_t i = 0; i < spec.n; ++i) {
      std::size_t rest = i;
      // Last coordinate varies fastest.
      for (std::size_t j = spec.d; j-- > 0;) {
        const std::size_t t = rest % side;
        rest /= side;
        values[i * spec.d + j] =
            lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(side - 1);
      }
    }
  } else {
    std::mt19937_64 rng(derive_seed(spec.seed, 0xde51));
    std::uniform_real_distribution<double> unif(lo, hi);
    for (double& v : values) v = unif(rng);
  }
  return Matrix(spec.n, spec.d, std::move(values));
}

std::vector<double> draw_noise(NoiseFamily family, double sd, std::size_t n, std::uint64_t seed) {
  std::vector<double> eps(n, 0.0);
  if (sd == 0.0) return eps;
  std::mt19937_64 rng(seed);
  switch (family) {
    case NoiseFamily::gaussian: {
      std::normal_distribution<double> normal(0.0, sd);
      for (double& e : eps) e = normal(rng);
      break;
    }
    case NoiseFamily::uniform: {
      const double half_width = std::sqrt(3.0) * sd;
      std::uniform_real_distribution<double> unif(-half_width, half_width);
      for (double& e : eps) e = unif(rng);
      break;
    }
    case NoiseFamily::rademacher:
      for (double& e : eps) e = (rng() >> 63) ? sd : -sd;
      break;
  }
  return eps;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  Matrix points = generate_design(spec);
  std::vector<double> mu(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    mu[i] = evaluate(spec.function, points.row(i), spec.constant_value);
  }
  auto eps = draw_noise(spec.noise_family, spec.noise_sd, spec.n, derive_seed(spec.seed, 0x401e));
  std::vector<double> y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) y[i] = mu[i] + eps[i];
  return LabeledDataset{Dataset(std::move(points), std::move(y)), std::move(mu), spec.noise_sd,
                        spec.noise_family};
}

LabeledDataset redraw_noise(const LabeledDataset& labeled, std::uint64_t noise_seed) {
  const std::size_t n = labeled.mu.size();
  auto eps = draw_noise(labeled.noise_family, labeled.noise_sd, n, noise_seed);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labeled.mu[i] + eps[i];
  return LabeledDataset{labeled.data.with_responses(std::move(y)), labeled.mu, labeled.noise_sd,
                        labeled.noise_family};
}

Dataset parse_csv(std::string_view text, bool has_header, ColumnSelector response,
                  std::string_view source) {
  Table t = parse_table(text, has_header, source);
  if (t.rows < 2) throw validation_error(std::string(source) + ": need at least 2 data rows");
  if (t.cols < 2) throw parse_error(std::string(source) + ": need at least 2 columns");
  const long cols = static_cast<long>(t.cols);
  const long idx = response.index < 0 ? cols + response.index : response.index;
  if (idx < 0 || idx >= cols) {
    throw validation_error(std::string(source) + ": response column " +
                           std::to_string(response.index) + " out of range for " +
                           std::to_string(cols) + " columns");
  }
  const std::size_t resp = static_cast<std::size_t>(idx);
  std::vector<double> coords;
  coords.reserve(t.rows * (t.cols - 1));
  std::vector<double> y(t.rows);
  for (std::size_t r = 0; r < t.rows; ++r) {
    for (std::size_t c = 0; c < t.cols; ++c) {
      const double v = t.cells[r * t.cols + c];
      if (c == resp) {
        y[r] = v;
      } else {
        coords.push_back(v);
      }
    }
  }
  return Dataset(Matrix(t.rows, t.cols - 1, std::move(coords)), std::move(y));
}

Dataset load_csv(const std::filesystem::path& path, bool has_header, ColumnSelector response) {
  return parse_csv(read_file(path), has_header, response, path.string());
}

Matrix parse_matrix_csv(std::string_view text, bool has_header, std::string_view source) {
  Table t = parse_table(text, has_header, source);
  if (t.rows < 1) throw parse_error(std::string(source) + ": no data rows");
  return Matrix(t.rows, t.cols, std::move(t.cells));
}

Matrix load_matrix_csv(const std::filesystem::path& path, bool has_header) {
  return parse_matrix_csv(read_file(path), has_header, path.string());
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw resource_error("cannot write " + path.string());
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.point(i)) out << format_double(v) << ',';
    out << format_double(data.responses()[i]) << '\n';
  }
}

void save_labeled(const LabeledDataset& labeled, const SyntheticSpec& spec,
                  const std::filesystem::path& csv_path) {
  write_csv(labeled.data, csv_path);
  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["n"] = labeled.data.size();
  manifest["d"] = labeled.data.dim();
  manifest["function_id"] = std::string(to_string(spec.function));
  if (spec.function == FunctionId::constant) manifest["constant_value"] = spec.constant_value;
  manifest["noise_sd"] = labeled.noise_sd;
  manifest["noise_family"] = std::string(to_string(labeled.noise_family));
  manifest["design"] = std::string(to_string(spec.design));
  manifest["domain"] = {spec.domain_lo, spec.domain_hi};
  manifest["seed"] = spec.seed;
  manifest["subgaussian_k"] = subgaussian_constant(labeled.noise_family, labeled.noise_sd);
  std::ofstream out(csv_path.string() + ".json", std::ios::binary);
  if (!out) throw resource_error("cannot write manifest next to " + csv_path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace knnloo
