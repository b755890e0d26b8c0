#include "knnloo/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "knnloo/dataset.hpp"
#include "knnloo/error.hpp"
#include "knnloo/neighbors.hpp"
#include "knnloo/parallel.hpp"
#include "knnloo/regress.hpp"
#include "knnloo/spectral.hpp"
#include "knnloo/verify.hpp"

namespace knnloo::cli {

namespace {

struct Options {
  std::string input;
  bool header = false;
  long response_col = -1;
  std::optional<std::size_t> k_max;
  std::uint64_t seed = 42;
  std::string tie_mode = "seeded";
  std::optional<std::size_t> k;
  std::string out;
  std::string spec;
  std::string model;
  std::string train;
  std::string format;  // empty: the command's default
  int threads = 0;

  // generate
  std::size_t gen_n = 100;
  std::size_t gen_d = 1;
  std::string function = "lipschitz-sine";
  double noise_sd = 1.0;
  std::string noise_family = "gaussian";
  std::string design = "uniform-random";
};

TieRule tie_rule(const Options& o) {
  TieRule tie;
  tie.seed = o.seed;
  tie.mode = o.tie_mode == "index" ? TieMode::index_order : TieMode::seeded_uniform;
  return tie;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw resource_error("cannot write " + path);
  file << text;
}

Dataset load_input(const Options& o) {
  if (o.input.empty()) throw usage_error("--input is required");
  return load_csv(o.input, o.header, ColumnSelector{o.response_col});
}

std::string curve_text(const LoocvCurve& curve, std::size_t n, const std::string& format) {
  if (format == "csv") {
    std::string s = "k,f,selected\n";
    for (std::size_t k = 1; k <= curve.k_max(); ++k) {
      s += std::to_string(k) + ',' + format_double(curve.at(k)) + ',' +
           (k == curve.k_tilde ? "1" : "0") + '\n';
    }
    return s;
  }
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "knnloo-selection";
  j["n"] = n;
  j["k_max"] = curve.k_max();
  j["k_tilde"] = curve.k_tilde;
  j["f"] = curve.f;
  return j.dump(2) + "\n";
}

int cmd_select(const Options& o, std::ostream& out, std::ostream& err) {
  const Dataset data = load_input(o);
  FitOptions fo;
  fo.k_max = o.k_max;
  fo.tie = tie_rule(o);
  const FittedModel model = fit(data, fo);
  if (model.warning) err << "warning: " << *model.warning << '\n';
  emit(curve_text(model.curve, data.size(), o.format), o.out, out);
  return kOk;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const Dataset data = load_input(o);
  FitOptions fo;
  fo.k_max = o.k_max;
  fo.tie = tie_rule(o);
  fo.k_override = o.k;
  const FittedModel model = fit(data, fo);
  if (model.warning) err << "warning: " << *model.warning << '\n';
  const std::string training = std::filesystem::absolute(o.input).lexically_normal().string();
  emit(manifest_json(model, training, o.header, o.response_col), o.out, out);
  return kOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw usage_error("--model is required");
  if (o.input.empty()) throw usage_error("--input (query CSV) is required");
  const ModelManifest manifest = parse_manifest(read_text(o.model));
  const std::string train = o.train.empty() ? manifest.training_csv : o.train;
  const Dataset data =
      load_csv(train, manifest.has_header, ColumnSelector{manifest.response_column});
  const FittedModel model = restore_model(manifest, data);
  const Matrix queries = load_matrix_csv(o.input, o.header);
  const std::vector<double> yhat = predict(model, queries);
  std::string text;
  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "knnloo-predictions";
    j["k"] = model.k;
    j["predictions"] = yhat;
    text = j.dump(2) + "\n";
  } else {
    text = "prediction\n";
    for (double v : yhat) text += format_double(v) + '\n';
  }
  emit(text, o.out, out);
  return kOk;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.spec.empty()) throw usage_error("--spec is required");
  const ExperimentSpec spec = parse_experiment_spec(read_text(o.spec));
  const GapReport report = gap_experiment(spec);
  for (const auto& note : report.notes) err << "note: " << note << '\n';
  if (o.out.empty()) {
    out << (o.format == "csv" ? report.to_csv() : report.to_json(spec));
  } else {
    emit(report.to_json(spec), o.out + ".json", out);
    emit(report.to_csv(), o.out + ".csv", out);
  }
  return report.partial ? kResource : kOk;
}

int cmd_spectral(const Options& o, std::ostream& out, std::ostream&) {
  if (!o.k) throw usage_error("--k is required");
  const Dataset data = load_input(o);
  const NeighborTable table = build_table(data, *o.k, tie_rule(o));
  emit(spectral_report(data, table, *o.k).to_json(), o.out, out);
  return kOk;
}

int cmd_generate(const Options& o, std::ostream&, std::ostream&) {
  if (o.out.empty()) throw usage_error("--out is required");
  SyntheticSpec spec;
  spec.n = o.gen_n;
  spec.d = o.gen_d;
  spec.function = parse_function_id(o.function);
  spec.noise_sd = o.noise_sd;
  spec.noise_family = parse_noise_family(o.noise_family);
  spec.design = parse_design(o.design);
  spec.seed = o.seed;
  save_labeled(generate_synthetic(spec), spec, o.out);
  return kOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return kUsage;
    case ErrorKind::parse: return kParse;
    case ErrorKind::validation: return kValidation;
    case ErrorKind::resource: return kResource;
  }
  return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"k-NN regression with leave-one-out selection of k", "knnloo"};
  app.require_subcommand(1, 1);

  auto add_threads = [&o](CLI::App* cmd) {
    cmd->add_option("--threads", o.threads, "Worker threads (default: $KNNLOO_THREADS or all)");
  };
  auto add_data = [&o](CLI::App* cmd) {
    cmd->add_option("--input", o.input, "Training CSV");
    cmd->add_flag("--header", o.header, "First CSV row is a header");
    cmd->add_option("--response-col", o.response_col,
                    "Response column; negative counts from the right (default -1 = last)");
    cmd->add_option("--seed", o.seed, "Tie-breaking seed (default 42)");
    cmd->add_option("--tie-mode", o.tie_mode, "seeded | index")
        ->check(CLI::IsMember({"seeded", "index"}));
  };
  auto add_format = [&o](CLI::App* cmd) {
    cmd->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* select = app.add_subcommand("select", "Compute the LOOCV curve and the selected k");
  add_data(select);
  select->add_option("--k-max", o.k_max, "Largest k searched (default n-1)");
  select->add_option("--out", o.out, "Output file (default stdout)");
  add_format(select);
  add_threads(select);

  auto* fitc = app.add_subcommand("fit", "Select k and write a model manifest");
  add_data(fitc);
  fitc->add_option("--k-max", o.k_max, "Largest k searched (default n-1)");
  fitc->add_option("--k", o.k, "Use this k instead of the selected one");
  fitc->add_option("--out", o.out, "Model manifest path (default stdout)");
  add_threads(fitc);

  auto* pred = app.add_subcommand("predict", "Predict query rows with a fitted model");
  pred->add_option("--model", o.model, "Model manifest written by fit");
  pred->add_option("--input", o.input, "Query CSV (coordinates only)");
  pred->add_flag("--header", o.header, "Query CSV has a header row");
  pred->add_option("--train", o.train, "Training CSV (default: path stored in the manifest)");
  pred->add_option("--out", o.out, "Output file (default stdout)");
  add_format(pred);
  add_threads(pred);

  auto* ver = app.add_subcommand("verify", "Run a gap experiment from a JSON spec");
  ver->add_option("--spec", o.spec, "Experiment spec JSON");
  ver->add_option("--out", o.out, "Output prefix; writes <prefix>.json and <prefix>.csv");
  add_format(ver);
  add_threads(ver);

  auto* spec = app.add_subcommand("spectral", "Norm diagnostics of A = B^T B / n");
  add_data(spec);
  spec->add_option("--k", o.k, "Neighbor count");
  spec->add_option("--out", o.out, "Output file (default stdout)");
  add_threads(spec);

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and its manifest");
  gen->add_option("--n", o.gen_n, "Point count");
  gen->add_option("--d", o.gen_d, "Dimension");
  gen->add_option("--function", o.function, "linear | lipschitz-sine | constant");
  gen->add_option("--noise-sd", o.noise_sd, "Noise standard deviation");
  gen->add_option("--noise-family", o.noise_family, "gaussian | uniform | rademacher-scaled");
  gen->add_option("--design", o.design, "grid | uniform-random");
  gen->add_option("--seed", o.seed, "Seed");
  gen->add_option("--out", o.out, "CSV path; the manifest goes to <path>.json");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  if (o.format.empty()) o.format = pred->parsed() ? "csv" : "json";

  int threads = o.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv(kThreadsEnv)) threads = std::atoi(env);
  }
  std::optional<ThreadScope> scope;
  if (threads > 0) scope.emplace(threads);

  try {
    if (select->parsed()) return cmd_select(o, out, err);
    if (fitc->parsed()) return cmd_fit(o, out, err);
    if (pred->parsed()) return cmd_predict(o, out, err);
    if (ver->parsed()) return cmd_verify(o, out, err);
    if (spec->parsed()) return cmd_spectral(o, out, err);
    if (gen->parsed()) return cmd_generate(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace knnloo::cli
