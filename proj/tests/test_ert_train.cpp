#include <catch_amalgamated.hpp>

#include <vector>

#include "dmt/ert.hpp"
#include "dmt/ert_train.hpp"
#include "dmt/model_io.hpp"
#include "dmt/synth.hpp"
#include "util.hpp"

namespace {

dmt::ErtTrainParams quick_params() {
  dmt::ErtTrainParams p;
  p.cascades = 5;
  p.trees_per_cascade = 60;
  p.oversampling = 8;
  p.feature_pool_size = 60;
  p.test_splits = 10;
  p.tree_depth = 4;
  return p;
}

dmt::AnnotatedDataset corpus(const testutil::TempDir& dir, int count,
                             double warp, std::uint64_t seed) {
  dmt::LandmarkSynthParams params;
  params.count = count;
  params.landmark_count = 6;
  params.warp = warp;
  return dmt::synth_landmark_corpus(params, seed, dir.str("corpus"));
}

}  // namespace

TEST_CASE("training reduces the residual and beats the mean-shape baseline",
          "[ert-train]") {
  testutil::TempDir dir;
  const dmt::AnnotatedDataset ds = corpus(dir, 24, 0.6, 41);

  dmt::ErtTrainLog log;
  const dmt::ErtModel model = dmt::train_ert(ds, quick_params(), &log);

  REQUIRE(model.landmark_count() == 6);
  REQUIRE(model.cascades.size() == 5);
  REQUIRE(log.level_mse.size() == 5);
  REQUIRE(log.sample_count == 24 * 8);

  // The boosted cascade must shrink the training residual substantially.
  CHECK(log.level_mse.back() < 0.5 * log.level_mse.front());

  // And localization with the trained model must beat the static mean shape
  // (a zero-cascade model) on the training corpus.
  dmt::ErtModel mean_only = model;
  mean_only.cascades.clear();
  const double trained_err = dmt::evaluate_ert(model, ds);
  const double baseline_err = dmt::evaluate_ert(mean_only, ds);
  CAPTURE(trained_err, baseline_err);
  CHECK(trained_err < baseline_err);
  CHECK(trained_err < 0.2);
}

TEST_CASE("cascade-level training error is non-increasing", "[ert-train]") {
  testutil::TempDir dir;
  const dmt::AnnotatedDataset ds = corpus(dir, 16, 0.8, 42);

  dmt::ErtTrainLog log;
  dmt::train_ert(ds, quick_params(), &log);
  REQUIRE(log.level_mse.size() == 5);
  for (std::size_t i = 1; i < log.level_mse.size(); ++i)
    CHECK(log.level_mse[i] <= log.level_mse[i - 1] + 1e-9);
}

TEST_CASE("identical seeds give bit-identical models", "[ert-train]") {
  testutil::TempDir dir;
  const dmt::AnnotatedDataset ds = corpus(dir, 12, 0.7, 43);

  dmt::ErtTrainParams params = quick_params();
  params.cascades = 3;
  const std::string a = dmt::serialize_model(dmt::train_ert(ds, params));
  const std::string b = dmt::serialize_model(dmt::train_ert(ds, params));
  CHECK(a == b);

  params.seed = 99;
  const std::string c = dmt::serialize_model(dmt::train_ert(ds, params));
  CHECK(a != c);
}

TEST_CASE("a single training unit reproduces its annotation exactly",
          "[ert-train]") {
  testutil::TempDir dir;
  const dmt::AnnotatedDataset ds = corpus(dir, 1, 0.0, 44);
  REQUIRE(ds.images.size() == 1);

  dmt::ErtTrainLog log;
  const dmt::ErtModel model = dmt::train_ert(ds, quick_params(), &log);
  CHECK(log.sample_count == 8);
  // With one unit the mean start coincides with the annotation, so the
  // residual is zero throughout and the placed shape must land on the
  // annotation to fp precision.
  for (double mse : log.level_mse) CHECK(mse == 0.0);
  CHECK(dmt::evaluate_ert(model, ds) < 1e-9);
}

TEST_CASE("parameter validation", "[ert-train]") {
  testutil::TempDir dir;
  const dmt::AnnotatedDataset ds = corpus(dir, 2, 0.5, 45);

  dmt::ErtTrainParams params = quick_params();
  params.tree_depth = 1;
  CHECK_THROWS_AS(dmt::train_ert(ds, params), dmt::ValidationError);
  params.tree_depth = 17;
  CHECK_THROWS_AS(dmt::train_ert(ds, params), dmt::ValidationError);

  params = quick_params();
  params.feature_pool_size = 1;
  CHECK_THROWS_AS(dmt::train_ert(ds, params), dmt::ValidationError);

  params = quick_params();
  params.oversampling = 0;
  CHECK_THROWS_AS(dmt::train_ert(ds, params), dmt::ValidationError);
}

TEST_CASE("training data validation", "[ert-train]") {
  testutil::TempDir dir;

  SECTION("dataset without part annotations") {
    dmt::DetectorSynthParams params;
    params.count = 2;
    const dmt::AnnotatedDataset boxes_only =
        dmt::synth_detector_corpus(params, 5, dir.str("boxes"));
    CHECK_THROWS_AS(dmt::train_ert(boxes_only, quick_params()),
                    dmt::TrainingDataError);
  }

  SECTION("inconsistent landmark counts") {
    dmt::AnnotatedDataset ds = corpus(dir, 2, 0.5, 46);
    REQUIRE(ds.images[1].boxes.size() == 1);
    ds.images[1].boxes[0].parts.pop_back();
    CHECK_THROWS_AS(dmt::train_ert(ds, quick_params()),
                    dmt::TrainingDataError);
  }

  SECTION("empty dataset") {
    CHECK_THROWS_AS(dmt::train_ert(dmt::AnnotatedDataset{}, quick_params()),
                    dmt::TrainingDataError);
  }
}
