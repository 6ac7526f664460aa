#include <catch_amalgamated.hpp>

#include <filesystem>
#include <vector>

#include "dmt/datasets.hpp"
#include "dmt/ebc.hpp"
#include "dmt/png_io.hpp"
#include "dmt/synth.hpp"
#include "util.hpp"

TEST_CASE("detector corpus: geometry, files and annotations agree",
          "[synth]") {
  testutil::TempDir dir;
  dmt::DetectorSynthParams params;
  params.count = 12;
  const dmt::AnnotatedDataset ds =
      dmt::synth_detector_corpus(params, 7, dir.str("det"));

  REQUIRE(ds.images.size() == 12);
  int targets = 0;
  for (const dmt::ImageAnnotation& ann : ds.images) {
    CHECK(ann.width == 240);
    CHECK(ann.height == 240);
    CHECK(std::filesystem::exists(ann.path));
    const auto [w, h] = dmt::image_dimensions(ann.path);
    CHECK(w == 240);
    CHECK(h == 240);
    for (const dmt::BoxAnnotation& box : ann.boxes) {
      if (box.ignore) continue;
      ++targets;
      CHECK(box.x >= 0.0);
      CHECK(box.y >= 0.0);
      CHECK(box.x + box.w <= 240.0);
      CHECK(box.y + box.h <= 240.0);
      CHECK(box.w >= params.min_size);
      CHECK(box.w <= params.max_size);
      CHECK(box.w == box.h);
    }
  }
  CHECK(targets >= 6);  // most images carry a target

  // The written annotations file describes exactly the returned dataset.
  const dmt::AnnotatedDataset loaded =
      dmt::parse_annotations(dir.str("det/annotations.xml"));
  REQUIRE(loaded.images.size() == ds.images.size());
  CHECK(loaded.box_count() == ds.box_count());
  for (std::size_t i = 0; i < loaded.images.size(); ++i) {
    CHECK(std::filesystem::path(loaded.images[i].path).filename() ==
          std::filesystem::path(ds.images[i].path).filename());
    CHECK(loaded.images[i].boxes.size() == ds.images[i].boxes.size());
  }
}

TEST_CASE("synthesis is seed deterministic", "[synth]") {
  testutil::TempDir dir;
  dmt::DetectorSynthParams params;
  params.count = 4;
  const dmt::AnnotatedDataset a =
      dmt::synth_detector_corpus(params, 99, dir.str("a"));
  const dmt::AnnotatedDataset b =
      dmt::synth_detector_corpus(params, 99, dir.str("b"));
  const dmt::AnnotatedDataset c =
      dmt::synth_detector_corpus(params, 100, dir.str("c"));

  bool any_pixel_differs_ab = false;
  bool any_pixel_differs_ac = false;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const dmt::GrayImage ia = dmt::load_image(a.images[i].path);
    const dmt::GrayImage ib = dmt::load_image(b.images[i].path);
    const dmt::GrayImage ic = dmt::load_image(c.images[i].path);
    if (ia.pixels != ib.pixels) any_pixel_differs_ab = true;
    if (ia.pixels != ic.pixels) any_pixel_differs_ac = true;

    REQUIRE(a.images[i].boxes.size() == b.images[i].boxes.size());
    for (std::size_t k = 0; k < a.images[i].boxes.size(); ++k) {
      CHECK(a.images[i].boxes[k].x == b.images[i].boxes[k].x);
      CHECK(a.images[i].boxes[k].y == b.images[i].boxes[k].y);
      CHECK(a.images[i].boxes[k].w == b.images[i].boxes[k].w);
    }
  }
  CHECK_FALSE(any_pixel_differs_ab);
  CHECK(any_pixel_differs_ac);
}

TEST_CASE("landmark corpus: parts are complete and ordered", "[synth]") {
  testutil::TempDir dir;
  dmt::LandmarkSynthParams params;
  params.count = 6;
  params.landmark_count = 5;
  const dmt::AnnotatedDataset ds =
      dmt::synth_landmark_corpus(params, 13, dir.str("lmk"));

  REQUIRE(ds.images.size() == 6);
  for (const dmt::ImageAnnotation& ann : ds.images) {
    REQUIRE(ann.boxes.size() == 1);
    const dmt::BoxAnnotation& box = ann.boxes[0];
    REQUIRE(box.parts.size() == 5);
    for (int k = 0; k < 5; ++k) {
      CHECK(box.parts[std::size_t(k)].first ==
            std::string(1, '0') + char('0' + k));
      // Landmarks sit inside the padded face box.
      const dmt::Vec2 p = box.parts[std::size_t(k)].second;
      CHECK(box.rect().contains(p));
    }
  }

  CHECK_THROWS_AS(
      dmt::synth_landmark_corpus({1, 100, 100, 2, 0.0}, 1, dir.str("bad")),
      dmt::ValidationError);
}

TEST_CASE("zero warp produces identical shapes in every image", "[synth]") {
  testutil::TempDir dir;
  dmt::LandmarkSynthParams params;
  params.count = 4;
  params.landmark_count = 6;
  params.warp = 0.0;
  const dmt::AnnotatedDataset ds =
      dmt::synth_landmark_corpus(params, 3, dir.str("flat"));

  const auto& ref = ds.images[0].boxes[0].parts;
  for (const dmt::ImageAnnotation& ann : ds.images)
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(ann.boxes[0].parts[k].second.x == ref[k].second.x);
      CHECK(ann.boxes[0].parts[k].second.y == ref[k].second.y);
    }
}

TEST_CASE("blink sequence follows the closure script", "[synth]") {
  testutil::TempDir dir;
  const dmt::BlinkSequence seq =
      dmt::synth_blink_sequence({}, 5, dir.str("blink"));

  REQUIRE(seq.frames.paths.size() == 9);
  REQUIRE(seq.frames.times.size() == 9);
  REQUIRE(seq.annotations.images.size() == 9);
  REQUIRE(seq.closures.size() == 9);

  // Default script 0 -> 100 -> 0 over 9 frames, piecewise linear.
  const std::vector<double> expect = {0, 25, 50, 75, 100, 75, 50, 25, 0};
  for (std::size_t f = 0; f < 9; ++f)
    CHECK(seq.closures[f] == Catch::Approx(expect[f]).margin(1e-12));

  // The annotated eye ring encodes exactly the scripted closure:
  // EAR = (1 - closure/100) * 0.5.
  for (std::size_t f = 0; f < 9; ++f) {
    const dmt::BoxAnnotation& box = seq.annotations.images[f].boxes[0];
    REQUIRE(box.parts.size() == 48);
    const double ear = dmt::eye_aspect_ratio(box.shape());
    CHECK(ear ==
          Catch::Approx((1.0 - seq.closures[f] / 100.0) * 0.5).margin(1e-12));
    CHECK(seq.frames.times[f] ==
          Catch::Approx(double(f) / 30.0).margin(1e-15));
  }

  CHECK(std::filesystem::exists(dir.str("blink/manifest.csv")));
  CHECK(std::filesystem::exists(dir.str("blink/annotations.xml")));

  dmt::BlinkSynthParams bad;
  bad.frames = 1;
  CHECK_THROWS_AS(dmt::synth_blink_sequence(bad, 1, dir.str("bad")),
                  dmt::ValidationError);
  bad.frames = 9;
  bad.closure_script = {50};
  CHECK_THROWS_AS(dmt::synth_blink_sequence(bad, 1, dir.str("bad2")),
                  dmt::ValidationError);
}
