#include <catch_amalgamated.hpp>

#include <cmath>

#include "dmt/model_io.hpp"
#include "dmt/mwma.hpp"
#include "util.hpp"

namespace {

dmt::DetectorModel random_model(dmt::Rng& rng, int window = 80) {
  dmt::DetectorModel m = dmt::DetectorModel::zeros(window);
  for (double& w : m.weights) w = rng.uniform(-2.0, 2.0);
  m.bias = rng.uniform(-1.0, 1.0);
  m.detection_threshold = rng.uniform(-0.2, 0.2);
  return m;
}

double max_weight_diff(const dmt::DetectorModel& a,
                       const dmt::DetectorModel& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    worst = std::max(worst, std::fabs(a.weights[i] - b.weights[i]));
  return worst;
}

}  // namespace

TEST_CASE("aggregating one model returns it bit-for-bit", "[mwma]") {
  dmt::Rng rng(31);
  const auto m = random_model(rng);
  const auto agg = dmt::aggregate_mwma({m});
  REQUIRE(dmt::serialize_model(agg) == dmt::serialize_model(m));
}

TEST_CASE("aggregate is the element-wise mean", "[mwma]") {
  dmt::Rng rng(32);
  auto a = dmt::DetectorModel::zeros(80);
  auto b = dmt::DetectorModel::zeros(80);
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    a.weights[i] = 1.0;
    b.weights[i] = 3.0;
  }
  a.bias = 2.0;
  b.bias = 4.0;
  a.detection_threshold = 0.1;
  b.detection_threshold = 0.3;
  const auto agg = dmt::aggregate_mwma({a, b});
  for (double w : agg.weights) REQUIRE(w == 2.0);
  REQUIRE(agg.bias == 3.0);
  REQUIRE(agg.detection_threshold == Catch::Approx(0.2).margin(1e-15));
}

TEST_CASE("aggregation is permutation invariant to the bit", "[mwma]") {
  dmt::Rng rng(33);
  std::vector<dmt::DetectorModel> models;
  for (int i = 0; i < 6; ++i) models.push_back(random_model(rng));

  const auto reference = dmt::aggregate_mwma(models);
  std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5};
  for (int round = 0; round < 10; ++round) {
    rng.shuffle(order);
    std::vector<dmt::DetectorModel> shuffled;
    for (std::size_t idx : order) shuffled.push_back(models[idx]);
    const auto agg = dmt::aggregate_mwma(shuffled);
    REQUIRE(max_weight_diff(agg, reference) == 0.0);  // bit-exact
    REQUIRE(agg.bias == reference.bias);
    REQUIRE(agg.detection_threshold == reference.detection_threshold);
  }
}

TEST_CASE("permutation invariance also holds with multiplicities", "[mwma]") {
  dmt::Rng rng(34);
  std::vector<dmt::DetectorModel> models;
  for (int i = 0; i < 4; ++i) models.push_back(random_model(rng));
  const std::vector<int> mult = {3, 1, 2, 5};

  const auto reference = dmt::aggregate_mwma(models, mult);
  const std::vector<std::size_t> order = {2, 0, 3, 1};
  std::vector<dmt::DetectorModel> shuffled;
  std::vector<int> shuffled_mult;
  for (std::size_t idx : order) {
    shuffled.push_back(models[idx]);
    shuffled_mult.push_back(mult[idx]);
  }
  const auto agg = dmt::aggregate_mwma(shuffled, shuffled_mult);
  REQUIRE(max_weight_diff(agg, reference) == 0.0);
  REQUIRE(agg.bias == reference.bias);
}

TEST_CASE("multiplicity k equals k repetitions", "[mwma]") {
  dmt::Rng rng(35);
  const auto a = random_model(rng);
  const auto b = random_model(rng);
  const auto weighted = dmt::aggregate_mwma({a, b}, {2, 3});
  const auto repeated = dmt::aggregate_mwma({a, a, b, b, b});
  REQUIRE(max_weight_diff(weighted, repeated) <= 1e-12);
  REQUIRE(weighted.bias == Catch::Approx(repeated.bias).margin(1e-12));
}

TEST_CASE("idempotence: mean of copies is the model", "[mwma]") {
  dmt::Rng rng(36);
  const auto m = random_model(rng);
  const auto triple = dmt::aggregate_mwma({m, m, m});
  REQUIRE(max_weight_diff(triple, m) <= 1e-12);
  REQUIRE(triple.bias == Catch::Approx(m.bias).margin(1e-12));
  REQUIRE(triple.detection_threshold ==
          Catch::Approx(m.detection_threshold).margin(1e-12));
}

TEST_CASE("aggregation validates its inputs", "[mwma]") {
  dmt::Rng rng(37);
  const auto a = random_model(rng, 80);
  const auto b = random_model(rng, 88);
  REQUIRE_THROWS_AS(dmt::aggregate_mwma(std::vector<dmt::DetectorModel>{}),
                    dmt::ValidationError);
  REQUIRE_THROWS_AS(dmt::aggregate_mwma({a, b}), dmt::IncompatibleModelsError);
  REQUIRE_THROWS_AS(dmt::aggregate_mwma({a, a}, {1}), dmt::ValidationError);
  REQUIRE_THROWS_AS(dmt::aggregate_mwma({a, a}, {1, 0}), dmt::ValidationError);

  auto malformed = a;
  malformed.weights.resize(10);
  REQUIRE_THROWS_AS(dmt::aggregate_mwma({malformed, a}), dmt::ValidationError);
}
