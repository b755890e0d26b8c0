#include "knnloo/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "knnloo/error.hpp"

namespace knnloo {

namespace {

constexpr std::size_t kBlockRows = 256;

void check_k(std::size_t k, std::size_t k_max) {
  if (k < 1 || k > k_max) {
    throw validation_error("k must lie in [1, " + std::to_string(k_max) + "], got " +
                           std::to_string(k));
  }
}

template <class Neighbors, class IndexOf>
void residuals_impl(double target, std::span<const double> values, const Neighbors& neighbors,
                    std::span<double> out, IndexOf index_of) {
  double running = 0.0;
  for (std::size_t r = 0; r < out.size(); ++r) {
    running += values[index_of(neighbors[r])];
    const double mean = running / static_cast<double>(r + 1);
    const double resid = target - mean;
    out[r] = resid * resid;
  }
}

}  // namespace

std::size_t select_k(std::span<const double> f) {
  if (f.empty()) throw validation_error("cannot select k from an empty curve");
  std::size_t best = 0;
  for (std::size_t k = 1; k < f.size(); ++k) {
    if (f[k] < f[best]) best = k;
  }
  return best + 1;
}

void row_residuals_sq(double target, std::span<const double> values,
                      std::span<const std::uint32_t> neighbors, std::span<double> out) {
  residuals_impl(target, values, neighbors, out, [](std::uint32_t j) { return j; });
}

void row_residuals_sq(double target, std::span<const double> values,
                      std::span<const Candidate> neighbors, std::span<double> out) {
  residuals_impl(target, values, neighbors, out, [](const Candidate& c) { return c.index; });
}

std::vector<double> average_rows(std::size_t n, std::size_t width, const RowFill& fill) {
  std::vector<double> sum(width, 0.0);
  std::vector<double> block(std::min(n, kBlockRows) * width);
  for (std::size_t start = 0; start < n; start += kBlockRows) {
    const std::size_t rows = std::min(kBlockRows, n - start);
    const auto count = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
      const auto local = static_cast<std::size_t>(r);
      fill(start + local, std::span<double>(block.data() + local * width, width));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = block.data() + r * width;
      for (std::size_t k = 0; k < width; ++k) sum[k] += row[k];
    }
  }
  for (double& s : sum) s /= static_cast<double>(n);
  return sum;
}

std::vector<double> loo_estimates(const Dataset& data, const NeighborTable& table, std::size_t k) {
  check_k(k, table.k_max());
  const auto& y = data.responses();
  std::vector<double> est(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double running = 0.0;
    for (auto j : table.neighbors(i, k)) running += y[j];
    est[i] = running / static_cast<double>(k);
  }
  return est;
}

LoocvCurve loocv_curve(const Dataset& data, const NeighborTable& table) {
  if (table.k_max() == 0 || table.size() != data.size()) {
    throw validation_error("neighbor table is empty or was built on other data");
  }
  const std::span<const double> y = data.responses();
  LoocvCurve curve;
  curve.f = average_rows(data.size(), table.k_max(), [&](std::size_t i, std::span<double> out) {
    row_residuals_sq(y[i], y, table.row(i), out);
  });
  curve.k_tilde = select_k(curve.f);
  return curve;
}

LoocvCurve loocv_curve(const Dataset& data, std::size_t k_max, const TieRule& tie,
                       Backend backend) {
  const RowSource source(data, k_max, tie, backend);
  const std::span<const double> y = data.responses();
  LoocvCurve curve;
  curve.f = average_rows(data.size(), k_max, [&](std::size_t i, std::span<double> out) {
    thread_local std::vector<Candidate> scratch, best;
    source.row(i, scratch, best);
    row_residuals_sq(y[i], y, std::span<const Candidate>(best), out);
  });
  curve.k_tilde = select_k(curve.f);
  return curve;
}

std::size_t default_k_max(std::size_t n) {
  if (n <= kFullRangeLimit) return n - 1;
  const auto capped = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0)));
  return std::min(n - 1, capped);
}

FittedModel fit(const Dataset& data, const FitOptions& options) {
  const std::size_t n = data.size();
  std::optional<std::string> warning;
  std::size_t k_max = 0;
  if (options.k_max) {
    k_max = *options.k_max;
    if (k_max < 1 || k_max > n - 1) {
      throw validation_error("k_max must lie in [1, n-1] = [1, " + std::to_string(n - 1) +
                             "], got " + std::to_string(k_max));
    }
  } else {
    k_max = default_k_max(n);
    if (k_max < n - 1) {
      warning = "n = " + std::to_string(n) + " exceeds " + std::to_string(kFullRangeLimit) +
                "; searching k in [1, " + std::to_string(k_max) + "] instead of [1, n-1]";
    }
  }
  if (options.k_override && (*options.k_override < 1 || *options.k_override > n)) {
    throw validation_error("k override must lie in [1, n] = [1, " + std::to_string(n) + "]");
  }
  LoocvCurve curve = loocv_curve(data, k_max, options.tie);
  const std::size_t k = options.k_override.value_or(curve.k_tilde);
  return FittedModel{data, k, std::move(curve), options.tie, options.k_override, warning};
}

std::vector<double> predict(const FittedModel& model, const Matrix& queries) {
  const Dataset& data = model.data;
  if (queries.cols() != data.dim()) {
    throw validation_error("query has dimension " + std::to_string(queries.cols()) +
                           ", model expects " + std::to_string(data.dim()));
  }
  const std::size_t k = model.k;
  check_k(k, data.size());
  std::unique_ptr<KdTree> tree;
  if (choose_backend(data.size(), k) == Backend::kd_tree) {
    tree = std::make_unique<KdTree>(data.points());
  }
  const auto& y = data.responses();
  std::vector<double> out(queries.rows());
  const auto m = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel
  {
    std::vector<Candidate> scratch, best;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t r = 0; r < m; ++r) {
      const auto q = static_cast<std::size_t>(r);
      const auto x = queries.row(q);
      if (tree) {
        tree->nearest(x, data.size(), k, model.tie, query_row_id(x), best);
      } else {
        nearest_exhaustive(data.points(), x, data.size(), k, model.tie, query_row_id(x), scratch,
                           best);
      }
      double running = 0.0;
      for (const auto& c : best) running += y[c.index];
      out[q] = running / static_cast<double>(k);
    }
  }
  return out;
}

std::string manifest_json(const FittedModel& model, const std::string& training_csv,
                          bool has_header, long response_column) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "knnloo-model";
  j["k"] = model.k;
  j["k_max"] = model.k_max();
  j["k_tilde"] = model.curve.k_tilde;
  j["k_override"] = model.k_override ? nlohmann::ordered_json(*model.k_override) : nullptr;
  j["tie_seed"] = model.tie.seed;
  j["tie_mode"] = model.tie.mode == TieMode::seeded_uniform ? "seeded-uniform" : "index-order";
  j["data_checksum"] = model.data.size() ? checksum(model.data) : 0;
  j["n"] = model.data.size();
  j["d"] = model.data.dim();
  j["training_csv"] = training_csv;
  j["has_header"] = has_header;
  j["response_column"] = response_column;
  j["curve"] = model.curve.f;
  return j.dump(2) + "\n";
}

ModelManifest parse_manifest(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("model manifest is not valid JSON: ") + e.what());
  }
  auto field = [&j](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw parse_error(std::string("model manifest lacks field '") + name + "'");
    return j.at(name);
  };
  ModelManifest m;
  try {
    if (field("format_version").get<int>() != kFormatVersion) {
      throw parse_error("unsupported model format_version");
    }
    m.k = field("k").get<std::size_t>();
    m.k_max = field("k_max").get<std::size_t>();
    if (!field("k_override").is_null()) m.k_override = j.at("k_override").get<std::size_t>();
    m.tie.seed = field("tie_seed").get<std::uint64_t>();
    const auto mode = field("tie_mode").get<std::string>();
    if (mode == "seeded-uniform") {
      m.tie.mode = TieMode::seeded_uniform;
    } else if (mode == "index-order") {
      m.tie.mode = TieMode::index_order;
    } else {
      throw parse_error("model manifest field 'tie_mode' has unknown value '" + mode + "'");
    }
    m.curve = field("curve").get<std::vector<double>>();
    m.data_checksum = field("data_checksum").get<std::uint64_t>();
    m.training_csv = field("training_csv").get<std::string>();
    m.has_header = field("has_header").get<bool>();
    m.response_column = field("response_column").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("model manifest has a field of the wrong type: ") + e.what());
  }
  if (m.curve.size() != m.k_max) throw parse_error("model manifest curve length != k_max");
  return m;
}

FittedModel restore_model(const ModelManifest& manifest, const Dataset& data) {
  if (checksum(data) != manifest.data_checksum) {
    throw validation_error("training data checksum does not match the model manifest "
                           "(stale model or modified data)");
  }
  LoocvCurve curve{manifest.curve, select_k(manifest.curve)};
  return FittedModel{data, manifest.k, std::move(curve), manifest.tie, manifest.k_override,
                     std::nullopt};
}

}  // namespace knnloo
