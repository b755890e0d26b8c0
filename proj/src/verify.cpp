#include "knnloo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "knnloo/error.hpp"
#include "knnloo/parallel.hpp"
#include "knnloo/regress.hpp"

namespace knnloo {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kTieStream = 0x746965ULL;

void check_labeled(const LabeledDataset& labeled, const NeighborTable& table) {
  if (labeled.mu.size() != labeled.data.size() || table.size() != labeled.data.size()) {
    throw validation_error("labeled dataset and neighbor table sizes differ");
  }
}

double bias_sq(const LabeledDataset& labeled, const NeighborTable& table, std::size_t k) {
  const auto& mu = labeled.mu;
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double running = 0.0;
    for (auto j : table.neighbors(i, k)) running += mu[j];
    const double resid = mu[i] - running / static_cast<double>(k);
    sum += resid * resid;
  }
  return sum / static_cast<double>(mu.size());
}

double variance_term(const LabeledDataset& labeled, std::size_t k) {
  return labeled.noise_sd * labeled.noise_sd / static_cast<double>(k);
}

// f(k) for one k, serially.
double loocv_at(std::span<const double> y, const NeighborTable& table, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double running = 0.0;
    for (auto j : table.neighbors(i, k)) running += y[j];
    const double resid = y[i] - running / static_cast<double>(k);
    sum += resid * resid;
  }
  return sum / static_cast<double>(y.size());
}

std::string rule_name(KMaxRule rule) {
  switch (rule) {
    case KMaxRule::full: return "full";
    case KMaxRule::sqrt: return "sqrt";
    case KMaxRule::user: return "user";
  }
  return "?";
}

std::size_t two_thirds_cap(std::size_t n) {
  const auto cap = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0)));
  return std::min(n - 1, std::max<std::size_t>(cap, 1));
}

}  // namespace

double exact_mse(const LabeledDataset& labeled, const NeighborTable& table, std::size_t k) {
  check_labeled(labeled, table);
  if (k < 1 || k > table.k_max()) {
    throw validation_error("k must lie in [1, " + std::to_string(table.k_max()) + "], got " +
                           std::to_string(k));
  }
  return bias_sq(labeled, table, k) + variance_term(labeled, k);
}

std::vector<double> exact_mse_curve(const LabeledDataset& labeled, const NeighborTable& table) {
  check_labeled(labeled, table);
  const std::span<const double> mu = labeled.mu;
  std::vector<double> curve =
      average_rows(mu.size(), table.k_max(), [&](std::size_t i, std::span<double> out) {
        row_residuals_sq(mu[i], mu, table.row(i), out);
      });
  for (std::size_t k = 1; k <= curve.size(); ++k) curve[k - 1] += variance_term(labeled, k);
  return curve;
}

std::size_t k_star(const LabeledDataset& labeled, const NeighborTable& table) {
  return select_k(exact_mse_curve(labeled, table));
}

SampleStats sample_stats(const std::vector<double>& values) {
  SampleStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double var = ss / static_cast<double>(values.size() - 1);
  s.std_error = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

DecompositionCheck decomposition_check(const LabeledDataset& labeled, const NeighborTable& table,
                                       std::size_t k, std::size_t redraws, std::uint64_t seed) {
  check_labeled(labeled, table);
  if (redraws < 100) throw validation_error("decomposition check needs at least 100 redraws");
  const double mse = exact_mse(labeled, table, k);
  const std::size_t n = labeled.mu.size();
  std::vector<double> f(redraws);
  const auto count = static_cast<std::ptrdiff_t>(redraws);
#pragma omp parallel
  {
    std::vector<double> y(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
      const auto eps = draw_noise(labeled.noise_family, labeled.noise_sd, n,
                                  derive_seed(seed, static_cast<std::uint64_t>(r)));
      for (std::size_t i = 0; i < n; ++i) y[i] = labeled.mu[i] + eps[i];
      f[static_cast<std::size_t>(r)] = loocv_at(y, table, k);
    }
  }
  const SampleStats stats = sample_stats(f);
  DecompositionCheck out;
  out.mc_mean_f = stats.mean;
  out.std_error = stats.std_error;
  out.target = labeled.noise_sd * labeled.noise_sd + mse;
  const double diff = out.mc_mean_f - out.target;
  if (out.std_error > 0.0) {
    out.z_score = diff / out.std_error;
  } else {
    out.z_score = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return out;
}

void ExperimentSpec::validate() const {
  if (n_grid.empty()) throw validation_error("experiment n_grid is empty");
  if (replicates < 1) throw validation_error("experiment replicates must be at least 1");
  if (k_max_rule == KMaxRule::user && user_k_max < 1) {
    throw validation_error("user k_max must be at least 1");
  }
  for (std::size_t n : n_grid) {
    SyntheticSpec s = data;
    s.n = n;
    s.validate();
  }
}

std::size_t k_max_for(const ExperimentSpec& spec, std::size_t n) {
  switch (spec.k_max_rule) {
    case KMaxRule::full:
      return n <= 1600 ? n - 1 : two_thirds_cap(n);
    case KMaxRule::sqrt:
      return two_thirds_cap(n);
    case KMaxRule::user:
      return std::min(n - 1, spec.user_k_max);
  }
  return n - 1;
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("experiment spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw parse_error("experiment spec must be a JSON object");

  std::string current;
  ExperimentSpec spec;
  try {
    auto require = [&](const nlohmann::json& obj, const char* name,
                       const std::string& path) -> const nlohmann::json& {
      current = path;
      if (!obj.contains(name)) throw parse_error("experiment spec lacks field '" + path + "'");
      return obj.at(name);
    };
    const auto& data = require(j, "data", "data");
    if (!data.is_object()) throw parse_error("experiment spec field 'data' must be an object");
    spec.data.function = parse_function_id(require(data, "function_id", "data.function_id").get<std::string>());
    spec.data.d = require(data, "d", "data.d").get<std::size_t>();
    if (data.contains("noise_sd")) {
      current = "data.noise_sd";
      spec.data.noise_sd = data.at("noise_sd").get<double>();
    }
    if (data.contains("noise_family")) {
      current = "data.noise_family";
      spec.data.noise_family = parse_noise_family(data.at("noise_family").get<std::string>());
    }
    if (data.contains("design")) {
      current = "data.design";
      spec.data.design = parse_design(data.at("design").get<std::string>());
    }
    if (data.contains("domain")) {
      current = "data.domain";
      const auto dom = data.at("domain").get<std::vector<double>>();
      if (dom.size() != 2) throw parse_error("experiment spec field 'data.domain' must be [lo, hi]");
      spec.data.domain_lo = dom[0];
      spec.data.domain_hi = dom[1];
    }
    if (data.contains("constant_value")) {
      current = "data.constant_value";
      spec.data.constant_value = data.at("constant_value").get<double>();
    }
    spec.n_grid = require(j, "n_grid", "n_grid").get<std::vector<std::size_t>>();
    spec.replicates = require(j, "replicates", "replicates").get<std::size_t>();
    if (j.contains("master_seed")) {
      current = "master_seed";
      spec.master_seed = j.at("master_seed").get<std::uint64_t>();
    }
    if (j.contains("max_table_bytes")) {
      current = "max_table_bytes";
      spec.max_table_bytes = j.at("max_table_bytes").get<std::size_t>();
    }
    if (j.contains("k_max_rule")) {
      current = "k_max_rule";
      const auto& rule = j.at("k_max_rule");
      if (rule.is_object()) {
        if (!rule.contains("user")) throw parse_error("experiment spec field 'k_max_rule' object needs 'user'");
        spec.k_max_rule = KMaxRule::user;
        spec.user_k_max = rule.at("user").get<std::size_t>();
      } else {
        const auto name = rule.get<std::string>();
        if (name == "full") {
          spec.k_max_rule = KMaxRule::full;
        } else if (name == "sqrt") {
          spec.k_max_rule = KMaxRule::sqrt;
        } else {
          throw parse_error("experiment spec field 'k_max_rule' has unknown value '" + name + "'");
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("experiment spec field '" + current + "' has the wrong type: " + e.what());
  }
  for (std::size_t n : spec.n_grid) {
    if (n < 2) throw validation_error("experiment spec field 'n_grid' entries must be >= 2");
  }
  spec.validate();
  return spec;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

GapReport gap_experiment(const ExperimentSpec& spec) {
  spec.validate();
  GapReport report;
  for (std::size_t n : spec.n_grid) {
    const std::size_t k_max = k_max_for(spec, n);
    const std::size_t bytes = n * k_max * (sizeof(std::uint32_t) + sizeof(double));
    if (bytes > spec.max_table_bytes) {
      report.partial = true;
      report.notes.push_back("n = " + std::to_string(n) + " skipped: neighbor table needs " +
                             std::to_string(bytes) + " bytes, cap is " +
                             std::to_string(spec.max_table_bytes));
      continue;
    }
    SyntheticSpec data_spec = spec.data;
    data_spec.n = n;
    data_spec.seed = derive_seed(spec.master_seed, n);
    const LabeledDataset design = generate_synthetic(data_spec);
    const TieRule tie{derive_seed(spec.master_seed, n, kTieStream), TieMode::seeded_uniform};
    const NeighborTable table = build_table(design.data, k_max, tie);
    const std::vector<double> mse = exact_mse_curve(design, table);
    const std::size_t kstar = select_k(mse);

    std::vector<Replicate> reps(spec.replicates);
    const auto count = static_cast<std::ptrdiff_t>(spec.replicates);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
      const auto idx = static_cast<std::size_t>(r);
      const LabeledDataset noisy = redraw_noise(
          design, derive_seed(derive_seed(spec.master_seed, n, kNoiseStream), idx));
      const LoocvCurve curve = loocv_curve(noisy.data, table);
      Replicate& rep = reps[idx];
      rep.n = n;
      rep.replicate = idx;
      rep.k_star = kstar;
      rep.k_tilde = curve.k_tilde;
      rep.mse_star = mse[kstar - 1];
      rep.mse_tilde = mse[curve.k_tilde - 1];
      rep.gap = rep.mse_tilde - rep.mse_star;
    }

    GapSummary summary;
    summary.n = n;
    summary.k_max = k_max;
    summary.replicates = reps.size();
    std::vector<double> gaps, ratios, scaled;
    const double scale = n > 2 ? std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(n)))
                               : std::numeric_limits<double>::quiet_NaN();
    for (const auto& rep : reps) {
      gaps.push_back(rep.gap);
      if (rep.mse_star > 0.0) {
        ratios.push_back(rep.mse_tilde / rep.mse_star);
      } else {
        ratios.push_back(rep.mse_tilde == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
      }
      scaled.push_back(rep.gap * scale);
    }
    summary.median_gap = median(gaps);
    summary.mean_gap = sample_stats(gaps).mean;
    summary.median_ratio = median(ratios);
    summary.median_scaled_gap = median(scaled);
    summary.median_mse_star = mse[kstar - 1];
    report.summaries.push_back(summary);
    report.replicates.insert(report.replicates.end(), reps.begin(), reps.end());
  }
  return report;
}

namespace {

nlohmann::ordered_json spec_json(const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["data"] = {{"function_id", std::string(to_string(spec.data.function))},
               {"d", spec.data.d},
               {"noise_sd", spec.data.noise_sd},
               {"noise_family", std::string(to_string(spec.data.noise_family))},
               {"design", std::string(to_string(spec.data.design))},
               {"domain", {spec.data.domain_lo, spec.data.domain_hi}}};
  if (spec.data.function == FunctionId::constant) j["data"]["constant_value"] = spec.data.constant_value;
  j["n_grid"] = spec.n_grid;
  j["replicates"] = spec.replicates;
  if (spec.k_max_rule == KMaxRule::user) {
    j["k_max_rule"] = {{"user", spec.user_k_max}};
  } else {
    j["k_max_rule"] = rule_name(spec.k_max_rule);
  }
  j["master_seed"] = spec.master_seed;
  return j;
}

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json report_json(const GapReport& report, const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "knnloo-gap-report";
  j["spec"] = spec_json(spec);
  j["partial"] = report.partial;
  j["notes"] = report.notes;
  auto& sums = j["summaries"] = nlohmann::ordered_json::array();
  for (const auto& s : report.summaries) {
    sums.push_back({{"n", s.n},
                    {"k_max", s.k_max},
                    {"replicates", s.replicates},
                    {"median_gap", s.median_gap},
                    {"mean_gap", s.mean_gap},
                    {"median_ratio", number_or_null(s.median_ratio)},
                    {"median_gap_sqrt_n_over_log_n", number_or_null(s.median_scaled_gap)},
                    {"mse_star", s.median_mse_star}});
  }
  auto& reps = j["replicates"] = nlohmann::ordered_json::array();
  for (const auto& r : report.replicates) {
    reps.push_back({{"n", r.n},
                    {"replicate", r.replicate},
                    {"k_star", r.k_star},
                    {"k_tilde", r.k_tilde},
                    {"mse_star", r.mse_star},
                    {"mse_tilde", r.mse_tilde},
                    {"gap", r.gap}});
  }
  return j;
}

}  // namespace

std::string GapReport::to_json(const ExperimentSpec& spec) const {
  return report_json(*this, spec).dump(2) + "\n";
}

std::string GapReport::to_csv() const {
  std::ostringstream out;
  out << "n,replicate,k_star,k_tilde,mse_star,mse_tilde,gap\n";
  for (const auto& r : replicates) {
    out << r.n << ',' << r.replicate << ',' << r.k_star << ',' << r.k_tilde << ','
        << format_double(r.mse_star) << ',' << format_double(r.mse_tilde) << ','
        << format_double(r.gap) << '\n';
  }
  return out.str();
}

AdaptivityReport adaptivity_probe(const ExperimentSpec& a, const ExperimentSpec& b) {
  auto mismatch = [](const char* what) {
    return validation_error(std::string("adaptivity probe specs differ in ") + what);
  };
  if (a.n_grid != b.n_grid) throw mismatch("n_grid");
  if (a.replicates != b.replicates) throw mismatch("replicates");
  if (a.master_seed != b.master_seed) throw mismatch("master_seed");
  if (a.k_max_rule != b.k_max_rule || a.user_k_max != b.user_k_max) throw mismatch("k_max_rule");
  if (a.data.noise_sd != b.data.noise_sd || a.data.noise_family != b.data.noise_family) {
    throw mismatch("noise");
  }
  if (a.data.d != b.data.d || a.data.design != b.data.design ||
      a.data.domain_lo != b.data.domain_lo || a.data.domain_hi != b.data.domain_hi) {
    throw mismatch("design");
  }
  AdaptivityReport out{gap_experiment(a), gap_experiment(b), {}};
  for (std::size_t s = 0; s < out.first.summaries.size() && s < out.second.summaries.size(); ++s) {
    const double denom = out.second.summaries[s].median_gap;
    const double num = out.first.summaries[s].median_gap;
    out.median_gap_ratio.push_back(denom > 0.0 ? num / denom
                                               : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

std::string AdaptivityReport::to_json(const ExperimentSpec& a, const ExperimentSpec& b) const {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "knnloo-adaptivity";
  j["first"] = report_json(first, a);
  j["second"] = report_json(second, b);
  auto& ratios = j["median_gap_ratio"] = nlohmann::ordered_json::array();
  for (double r : median_gap_ratio) ratios.push_back(number_or_null(r));
  return j.dump(2) + "\n";
}

}  // namespace knnloo
