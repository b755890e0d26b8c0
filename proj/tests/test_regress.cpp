#include <cmath>

#include "doctest.h"
#include "knnloo/error.hpp"
#include "knnloo/parallel.hpp"
#include "knnloo/regress.hpp"
#include "knnloo/spectral.hpp"
#include "oracle.hpp"
#include "reference.hpp"

using namespace knnloo;

namespace {

Dataset three_points() { return Dataset(Matrix(3, 1, {0, 1, 3}), {0, 1, 5}); }

}  // namespace

TEST_CASE("loo estimates") {
  const Dataset d = three_points();
  const NeighborTable t = build_table(d, 2, TieRule{});
  CHECK(loo_estimates(d, t, 1) == std::vector<double>{1, 0, 1});
  CHECK(loo_estimates(d, t, 2) == std::vector<double>{3, 2.5, 0.5});
  CHECK_THROWS_AS(loo_estimates(d, t, 3), Error);

  const Dataset c = d.with_responses({4.25, 4.25, 4.25});
  CHECK(loo_estimates(c, t, 1) == std::vector<double>(3, 4.25));
  CHECK(loo_estimates(c, t, 2) == std::vector<double>(3, 4.25));

  const Dataset r = oracle::random_dataset(40, 2, 8);
  const NeighborTable rt = build_table(r, 39, TieRule{});
  const auto est = loo_estimates(r, rt, 39);
  double total = 0.0;
  for (double y : r.responses()) total += y;
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(est[i] == doctest::Approx((total - r.responses()[i]) / 39.0).epsilon(1e-12));
  }
}

TEST_CASE("loocv curve on the three-point instance") {
  const Dataset d = three_points();
  const LoocvCurve curve = loocv_curve(d, build_table(d, 2, TieRule{}));
  CHECK(curve.f == std::vector<double>{6.0, 10.5});
  CHECK(curve.k_tilde == 1);
  CHECK(loocv_curve(d, 2, TieRule{}) == curve);
}

TEST_CASE("constant responses give a zero curve") {
  const Dataset d = oracle::random_dataset(30, 2, 4).with_responses(std::vector<double>(30, -2.0));
  const LoocvCurve curve = loocv_curve(d, 29, TieRule{});
  for (double f : curve.f) CHECK(f == 0.0);
  CHECK(curve.k_tilde == 1);
}

TEST_CASE("select_k picks the smallest minimizer") {
  CHECK(select_k(std::vector<double>{6, 10.5}) == 1);
  CHECK(select_k(std::vector<double>{3, 3, 5}) == 1);
  CHECK(select_k(std::vector<double>{5, 2, 4}) == 2);
  CHECK(select_k(std::vector<double>{5, 4, 4}) == 2);
  CHECK_THROWS_AS(select_k(std::vector<double>{}), Error);
}

TEST_CASE("streaming, table and naive curves agree bit for bit") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 2 + (seed * 53) % 499;
    const Dataset d = oracle::random_dataset(n, 1 + seed % 3, seed + 100);
    const TieRule tie{seed};
    const NeighborTable t = build_table(d, n - 1, tie);
    const LoocvCurve from_table = loocv_curve(d, t);
    CHECK(from_table.f == reference::naive_curve(d, t));
    CHECK(loocv_curve(d, n - 1, tie) == from_table);
    CHECK(from_table.k_tilde == select_k(reference::naive_curve(d, t)));
    for (double f : from_table.f) CHECK(f >= 0.0);
  }
}

TEST_CASE("streaming with the k-d tree matches the exhaustive rows") {
  const Dataset d = oracle::random_dataset(3000, 3, 77);
  const TieRule tie{5};
  CHECK(loocv_curve(d, 60, tie, Backend::kd_tree) == loocv_curve(d, 60, tie, Backend::exhaustive));
}

TEST_CASE("curve equals y^T A y for every k") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 3 + seed * 9;
    const Dataset d = oracle::random_dataset(n, 2, seed);
    const NeighborTable t = build_table(d, n - 1, TieRule{seed});
    const LoocvCurve curve = loocv_curve(d, t);
    for (std::size_t k = 1; k < n; ++k) {
      const double q = quadratic_form(build_a(build_b(t, k)), d.responses());
      CHECK(std::abs(curve.at(k) - q) <= 1e-10 * std::max(1.0, curve.at(k)));
    }
  }
}

TEST_CASE("shift and scale behavior") {
  const Dataset d = oracle::random_dataset(150, 2, 31);
  const LoocvCurve base = loocv_curve(d, 149, TieRule{});
  std::vector<double> shifted = d.responses(), scaled = d.responses();
  for (double& y : shifted) y += 3.5;
  for (double& y : scaled) y *= -2.0;
  const LoocvCurve s = loocv_curve(d.with_responses(shifted), 149, TieRule{});
  const LoocvCurve c = loocv_curve(d.with_responses(scaled), 149, TieRule{});
  for (std::size_t k = 1; k <= 149; ++k) {
    CHECK(s.at(k) == doctest::Approx(base.at(k)).epsilon(1e-10));
    CHECK(c.at(k) == doctest::Approx(4.0 * base.at(k)).epsilon(1e-12));
  }
  CHECK(s.k_tilde == base.k_tilde);
  CHECK(c.k_tilde == base.k_tilde);
}

TEST_CASE("curve is identical for every thread count") {
  const Dataset d = oracle::random_dataset(900, 3, 12);
  const LoocvCurve one = [&] {
    ThreadScope scope(1);
    return loocv_curve(d, 899, TieRule{4});
  }();
  for (int threads : {2, 8}) {
    ThreadScope scope(threads);
    CHECK(loocv_curve(d, 899, TieRule{4}) == one);
  }
}

TEST_CASE("fit") {
  const Dataset d = three_points();
  const FittedModel m = fit(d, {.k_max = 2});
  CHECK(m.k == 1);
  CHECK(m.curve.f == std::vector<double>{6.0, 10.5});
  CHECK_FALSE(m.warning);

  const FittedModel o = fit(d, {.k_max = 2, .k_override = 2});
  CHECK(o.k == 2);
  CHECK(o.curve == m.curve);

  const FittedModel two = fit(Dataset(Matrix(2, 1, {0, 1}), {1, 2}));
  CHECK(two.k_max() == 1);
  CHECK(two.k == 1);

  CHECK_THROWS_AS(fit(d, {.k_max = 3}), Error);
  CHECK_THROWS_AS(fit(d, {.k_override = 4}), Error);
}

TEST_CASE("fit caps the default range for large n") {
  const Dataset d = oracle::random_dataset(5000, 2, 1);
  const FittedModel m = fit(d);
  CHECK(m.k_max() == default_k_max(5000));
  CHECK(m.k_max() == 293);
  CHECK(m.warning.has_value());
  CHECK(default_k_max(4096) == 4095);
}

TEST_CASE("predict") {
  const Dataset d = three_points();
  FittedModel m = fit(d, {.k_max = 2});
  CHECK(predict(m, Matrix(1, 1, {2.4})) == std::vector<double>{5.0});
  CHECK(predict(m, Matrix(3, 1, {0, 1, 3})) == std::vector<double>{0, 1, 5});
  m.k = 3;
  CHECK(predict(m, Matrix(2, 1, {-7, 100})) == std::vector<double>{2, 2});
  CHECK_THROWS_AS(predict(m, Matrix(1, 2, {1, 2})), Error);
}

TEST_CASE("predict: k-d tree path matches brute force") {
  const Dataset d = oracle::random_dataset(4000, 2, 6);
  const FittedModel m = fit(d, {.k_max = 20});
  const Dataset q = oracle::random_dataset(200, 2, 7);
  const auto yhat = predict(m, q.points());
  for (std::size_t r = 0; r < q.size(); ++r) {
    const auto idx = query_neighbors(d, q.point(r), m.k, m.tie);
    double s = 0.0;
    for (auto j : idx) s += d.responses()[j];
    CHECK(yhat[r] == s / static_cast<double>(m.k));
  }
}

TEST_CASE("model manifest round trip") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = oracle::random_dataset(60 + seed, 2, seed);
    const FittedModel m = fit(d, {.tie = TieRule{seed, TieMode::seeded_uniform}});
    const ModelManifest manifest = parse_manifest(manifest_json(m, "train.csv", true, -1));
    CHECK(manifest.k == m.k);
    CHECK(manifest.curve == m.curve.f);
    const FittedModel back = restore_model(manifest, d);
    const Dataset q = oracle::random_dataset(30, 2, seed + 50);
    CHECK(predict(back, q.points()) == predict(m, q.points()));
  }
  const Dataset d = three_points();
  const ModelManifest manifest = parse_manifest(manifest_json(fit(d), "x.csv", false, -1));
  CHECK_THROWS_AS(restore_model(manifest, d.with_responses({0, 1, 6})), Error);
  CHECK_THROWS_AS(parse_manifest("{\"format_version\": 1}"), Error);
  CHECK_THROWS_AS(parse_manifest("not json"), Error);
}
