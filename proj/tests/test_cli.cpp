#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "knnloo/cli.hpp"

namespace fs = std::filesystem;
using knnloo::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "knnloo");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp_dir() {
  const fs::path dir = fs::path(KNNLOO_TEST_TMP) / "cli";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = tmp_dir() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string random_csv(std::size_t n) {
  std::string s = "x1,x2,y\n";
  std::uint64_t state = 12345;
  auto next = [&state] {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) / 9007199254740992.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double a = next(), b = next();
    s += std::to_string(a) + ',' + std::to_string(b) + ',' + std::to_string(a - b + next()) + '\n';
  }
  return s;
}

}  // namespace

TEST_CASE("select on the three-point instance") {
  const std::string csv = write_file("three.csv", "0,0\n1,1\n3,5\n");
  const Result r = invoke({"select", "--input", csv});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["kind"] == "knnloo-selection");
  CHECK(j["k_tilde"] == 1);
  CHECK(j["f"] == nlohmann::json::array({6.0, 10.5}));

  const Result c = invoke({"select", "--input", csv, "--format", "csv"});
  CHECK(c.out == "k,f,selected\n1,6,1\n2,10.5,0\n");
}

TEST_CASE("select with a header and a response column") {
  const std::string csv = write_file("named.csv", "y,x\n0,0\n1,1\n5,3\n");
  const Result r = invoke({"select", "--input", csv, "--header", "--response-col", "0"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["f"] == nlohmann::json::array({6.0, 10.5}));
}

TEST_CASE("constant responses") {
  const std::string csv = write_file("const.csv", "0,2\n1,2\n3,2\n7,2\n");
  const auto j = nlohmann::json::parse(invoke({"select", "--input", csv}).out);
  CHECK(j["f"] == nlohmann::json::array({0.0, 0.0, 0.0}));
  CHECK(j["k_tilde"] == 1);
}

TEST_CASE("error exit codes") {
  const Result missing = invoke({"select", "--input", "/nonexistent/data.csv"});
  CHECK(missing.code == knnloo::cli::kParse);
  CHECK(missing.err.find("/nonexistent/data.csv") != std::string::npos);

  const std::string bad = write_file("bad.csv", "0,1\n1,abc\n2,3\n");
  const Result parse = invoke({"select", "--input", bad});
  CHECK(parse.code == knnloo::cli::kParse);
  CHECK(parse.err.find("row 2") != std::string::npos);

  const std::string one = write_file("one.csv", "0,1\n");
  CHECK(invoke({"select", "--input", one}).code == knnloo::cli::kValidation);

  const std::string three = write_file("three.csv", "0,0\n1,1\n3,5\n");
  CHECK(invoke({"select", "--input", three, "--k-max", "3"}).code == knnloo::cli::kValidation);
  CHECK(invoke({}).code == knnloo::cli::kUsage);
  CHECK(invoke({"select"}).code == knnloo::cli::kUsage);
  CHECK(invoke({"bogus"}).code == knnloo::cli::kUsage);
  CHECK(invoke({"select", "--input", three, "--tie-mode", "coin"}).code == knnloo::cli::kUsage);
}

TEST_CASE("fit then predict") {
  const std::string train = write_file("train.csv", random_csv(300));
  const std::string model = (tmp_dir() / "model.json").string();
  REQUIRE(invoke({"fit", "--input", train, "--header", "--out", model}).code == 0);
  const auto manifest = nlohmann::json::parse(read_file(model));
  CHECK(manifest["format_version"] == 1);

  const std::string queries = write_file("queries.csv", "0.5,0.5\n0.1,0.9\n");
  const Result p = invoke({"predict", "--model", model, "--input", queries});
  REQUIRE(p.code == 0);
  CHECK(p.out.rfind("prediction\n", 0) == 0);
  CHECK(std::count(p.out.begin(), p.out.end(), '\n') == 3);
  const Result pj = invoke({"predict", "--model", model, "--input", queries, "--format", "json"});
  CHECK(nlohmann::json::parse(pj.out)["predictions"].size() == 2);

  const std::string wrong = write_file("wrong_dim.csv", "0.5\n");
  CHECK(invoke({"predict", "--model", model, "--input", wrong}).code == knnloo::cli::kValidation);

  const std::string changed = write_file("changed.csv", random_csv(301));
  CHECK(invoke({"predict", "--model", model, "--input", queries, "--train", changed}).code ==
        knnloo::cli::kValidation);
}

TEST_CASE("fit honors --k") {
  const std::string three = write_file("three.csv", "0,0\n1,1\n3,5\n");
  const auto j = nlohmann::json::parse(invoke({"fit", "--input", three, "--k", "2"}).out);
  CHECK(j["k"] == 2);
}

TEST_CASE("spectral on the three-point instance") {
  const std::string csv = write_file("three.csv", "0,0\n1,1\n3,5\n");
  const Result r = invoke({"spectral", "--input", csv, "--k", "1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["frobenius_sq"].get<double>() == doctest::Approx(8.0 / 3.0));
  CHECK(j["trace"].get<double>() == doctest::Approx(2.0));
  CHECK(invoke({"spectral", "--input", csv}).code == knnloo::cli::kUsage);
}

TEST_CASE("verify is reproducible") {
  const std::string spec = write_file("spec.json", R"({
    "data": {"function_id": "lipschitz-sine", "d": 1, "noise_sd": 1.0},
    "n_grid": [40, 80], "replicates": 4, "k_max_rule": "full"})");
  const std::string a = (tmp_dir() / "run_a").string();
  const std::string b = (tmp_dir() / "run_b").string();
  REQUIRE(invoke({"verify", "--spec", spec, "--out", a}).code == 0);
  REQUIRE(invoke({"verify", "--spec", spec, "--out", b, "--threads", "3"}).code == 0);
  CHECK(read_file(a + ".json") == read_file(b + ".json"));
  CHECK(read_file(a + ".csv") == read_file(b + ".csv"));

  const std::string broken = write_file("broken.json", R"({"data": {"d": 1}, "n_grid": [40]})");
  const Result r = invoke({"verify", "--spec", broken});
  CHECK(r.code == knnloo::cli::kParse);
  CHECK(r.err.find("function_id") != std::string::npos);
}

TEST_CASE("generate writes data and manifest") {
  const std::string out = (tmp_dir() / "gen.csv").string();
  REQUIRE(invoke({"generate", "--n", "16", "--d", "2", "--function", "linear", "--design", "grid",
                  "--out", out})
              .code == 0);
  CHECK(fs::exists(out + ".json"));
  const auto manifest = nlohmann::json::parse(read_file(out + ".json"));
  CHECK(manifest["n"] == 16);
  CHECK(invoke({"select", "--input", out, "--header"}).code == 0);
  CHECK(invoke({"generate", "--n", "10", "--d", "2", "--design", "grid", "--out", out}).code ==
        knnloo::cli::kValidation);
}

TEST_CASE("output does not depend on the thread count") {
  const std::string train = write_file("threads.csv", random_csv(500));
  const std::string base = invoke({"select", "--input", train, "--header", "--threads", "1"}).out;
  for (const char* t : {"2", "8"}) {
    CHECK(invoke({"select", "--input", train, "--header", "--threads", t}).out == base);
  }
}
