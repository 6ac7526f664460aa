#include <catch_amalgamated.hpp>

#include <cmath>

#include "dmt/ert.hpp"
#include "oracles.hpp"
#include "util.hpp"

namespace {

dmt::Shape shape_of(std::initializer_list<dmt::Vec2> pts) {
  dmt::Shape s;
  s.landmarks = pts;
  return s;
}

std::vector<dmt::Vec2> to_points(const dmt::Shape& s) { return s.landmarks; }

}  // namespace

TEST_CASE("similarity transform: identity", "[ert]") {
  const auto s = shape_of({{0, 0}, {1, 0}, {0.3, 0.9}});
  const auto t = dmt::similarity_transform(s, s);
  REQUIRE(t.scale == Catch::Approx(1.0));
  REQUIRE(t.rotation == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(t.translation.x == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(t.translation.y == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("similarity transform: pure translation and pure scale", "[ert]") {
  const auto s = shape_of({{0, 0}, {2, 0}, {1, 1}});
  dmt::Shape moved = s;
  for (auto& p : moved.landmarks) p += {3.0, -1.5};
  auto t = dmt::similarity_transform(s, moved);
  REQUIRE(t.scale == Catch::Approx(1.0));
  REQUIRE(t.rotation == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(t.translation.x == Catch::Approx(3.0));
  REQUIRE(t.translation.y == Catch::Approx(-1.5));

  dmt::Shape doubled = s;
  for (auto& p : doubled.landmarks) p *= 2.0;
  t = dmt::similarity_transform(s, doubled);
  REQUIRE(t.scale == Catch::Approx(2.0));
  REQUIRE(t.rotation == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("similarity transform recovers a known rotation", "[ert]") {
  const double angle = 0.7;
  const auto s = shape_of({{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {0.5, 0.2}});
  dmt::Shape rotated;
  for (const auto& p : s.landmarks) {
    rotated.landmarks.push_back({1.4 * (std::cos(angle) * p.x - std::sin(angle) * p.y) + 5.0,
                                 1.4 * (std::sin(angle) * p.x + std::cos(angle) * p.y) - 2.0});
  }
  const auto t = dmt::similarity_transform(s, rotated);
  REQUIRE(t.scale == Catch::Approx(1.4));
  REQUIRE(t.rotation == Catch::Approx(angle));
  REQUIRE(t.translation.x == Catch::Approx(5.0));
  REQUIRE(t.translation.y == Catch::Approx(-2.0));
  // apply() reproduces the target points
  for (std::size_t i = 0; i < s.size(); ++i) {
    const dmt::Vec2 mapped = t.apply(s[i]);
    REQUIRE(mapped.x == Catch::Approx(rotated[i].x));
    REQUIRE(mapped.y == Catch::Approx(rotated[i].y));
  }
}

TEST_CASE("closed-form similarity is least-squares optimal", "[ert]") {
  dmt::Rng rng(41);
  for (int round = 0; round < 5; ++round) {
    const double scale = rng.uniform(0.4, 3.0);
    const double angle = rng.uniform(-2.5, 2.5);
    const dmt::Vec2 shift{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    dmt::Shape from, to;
    const int n = rng.uniform_int(3, 12);
    for (int i = 0; i < n; ++i) {
      const dmt::Vec2 p{rng.uniform(-2, 2), rng.uniform(-2, 2)};
      from.landmarks.push_back(p);
      const dmt::Vec2 noise{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
      to.landmarks.push_back(
          {scale * (std::cos(angle) * p.x - std::sin(angle) * p.y) + shift.x +
               noise.x,
           scale * (std::sin(angle) * p.x + std::cos(angle) * p.y) + shift.y +
               noise.y});
    }
    const auto t = dmt::similarity_transform(from, to);
    const double closed_cost = oracle::similarity_cost(
        to_points(from), to_points(to), t.scale, t.rotation, t.translation);
    const auto grid = oracle::grid_fit_similarity(to_points(from), to_points(to));
    // no grid candidate may beat the closed form (allow fp slack)
    REQUIRE(closed_cost <= grid.cost + 1e-9);
    // and the refined grid search lands on the same optimum
    REQUIRE(grid.cost <= closed_cost + std::max(1e-6, closed_cost * 1e-3));
  }
}

TEST_CASE("similarity transform rejects degenerate input", "[ert]") {
  REQUIRE_THROWS_AS(
      dmt::similarity_transform(shape_of({{1, 1}}), shape_of({{2, 2}})),
      dmt::DegenerateInputError);
  REQUIRE_THROWS_AS(dmt::similarity_transform(shape_of({{1, 1}, {2, 2}}),
                                              shape_of({{1, 1}})),
                    dmt::DegenerateInputError);
  // zero spread: all source points identical
  REQUIRE_THROWS_AS(dmt::similarity_transform(shape_of({{1, 1}, {1, 1}}),
                                              shape_of({{0, 0}, {2, 2}})),
                    dmt::DegenerateInputError);
}

TEST_CASE("box normalization round-trips", "[ert]") {
  const dmt::Rect box{10, 20, 40, 30};
  dmt::Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const dmt::Vec2 p{rng.uniform(0, 100), rng.uniform(0, 100)};
    const dmt::Vec2 n = dmt::box_normalize(p, box);
    const dmt::Vec2 back = dmt::box_denormalize(n, box);
    REQUIRE(back.x == Catch::Approx(p.x).margin(1e-12));
    REQUIRE(back.y == Catch::Approx(p.y).margin(1e-12));
  }
  REQUIRE(dmt::box_normalize(dmt::Vec2{10, 20}, box) == dmt::Vec2{0, 0});
  REQUIRE(dmt::box_normalize(dmt::Vec2{50, 50}, box) == dmt::Vec2{1, 1});
}

TEST_CASE("tree traversal follows the comparison convention", "[ert]") {
  // Root split: feature[0] - feature[1] > 0.5 goes left (child 1), else
  // right (child 2). Depth 2: one split, two leaves.
  dmt::RegressionTree tree;
  tree.splits = {{0, 1, 0.5}};
  tree.leaves = {{{1.0, 0.0}}, {{2.0, 0.0}}};
  const float left_case[] = {3.0f, 1.0f};   // diff 2 > 0.5 -> leaf 0
  const float right_case[] = {1.0f, 1.0f};  // diff 0 <= 0.5 -> leaf 1
  REQUIRE(tree.traverse(std::span<const float>(left_case, 2)) == 0);
  REQUIRE(tree.traverse(std::span<const float>(right_case, 2)) == 1);
}

TEST_CASE("depth-3 traversal indexes leaves breadth-first", "[ert]") {
  // splits: node0 (root), node1, node2; leaves: 4 entries.
  dmt::RegressionTree tree;
  tree.splits = {{0, 1, 0.0}, {2, 3, 0.0}, {4, 5, 0.0}};
  tree.leaves = {{{0, 0}}, {{1, 1}}, {{2, 2}}, {{3, 3}}};
  // features chosen to steer: all diffs positive -> always left.
  const float all_left[] = {1, 0, 1, 0, 1, 0};
  REQUIRE(tree.traverse(std::span<const float>(all_left, 6)) == 0);
  const float all_right[] = {0, 1, 0, 1, 0, 1};
  REQUIRE(tree.traverse(std::span<const float>(all_right, 6)) == 3);
  // left at root, right at node1 -> leaf 1
  const float left_right[] = {1, 0, 0, 1, 0, 0};
  REQUIRE(tree.traverse(std::span<const float>(left_right, 6)) == 1);
}

TEST_CASE("localize validates inputs", "[ert]") {
  dmt::Rng rng(43);
  const auto img = testutil::random_image(100, 100, rng);
  dmt::ErtModel model;
  model.init_shape = shape_of({{0.3, 0.3}, {0.7, 0.3}, {0.5, 0.8}});
  // no cascades: output is the denormalized init shape
  const auto placed = dmt::localize(img, {10, 10, 50, 50}, model);
  REQUIRE(placed.size() == 3);
  REQUIRE(placed[0].x == Catch::Approx(10 + 0.3 * 50));
  REQUIRE(placed[2].y == Catch::Approx(10 + 0.8 * 50));

  REQUIRE_THROWS_AS(dmt::localize(img, {80, 80, 40, 40}, model),
                    dmt::ValidationError);  // box sticks out
  REQUIRE_THROWS_AS(dmt::localize(img, {-5, 10, 50, 50}, model),
                    dmt::ValidationError);

  dmt::Shape wrong = shape_of({{0, 0}});
  REQUIRE_THROWS_AS(dmt::localize_with_init(img, {10, 10, 50, 50}, model, wrong),
                    dmt::IncompatibleModelsError);

  dmt::ErtModel empty;
  REQUIRE_THROWS_AS(dmt::localize(img, {10, 10, 50, 50}, empty),
                    dmt::DegenerateInputError);
}

TEST_CASE("cascade applies leaf corrections additively", "[ert]") {
  // Single cascade, single degenerate tree that always routes to leaf 1
  // (diff 0 <= threshold infinity is false... threshold +inf -> right).
  dmt::Rng rng(44);
  const auto img = testutil::random_image(60, 60, rng);
  dmt::ErtModel model;
  model.init_shape = shape_of({{0.25, 0.25}, {0.75, 0.75}});
  dmt::CascadeLevel level;
  level.anchors = {{0, {0.0, 0.0}}, {1, {0.0, 0.0}}};
  dmt::RegressionTree tree;
  tree.splits = {{0, 1, std::numeric_limits<double>::infinity()}};
  tree.leaves = {{{9.0, 9.0}, {9.0, 9.0}},        // never taken
                 {{0.1, 0.0}, {0.0, -0.1}}};      // always taken
  level.forest = {tree, tree};  // applied twice
  model.cascades.push_back(level);

  const dmt::Rect box{10, 10, 40, 40};
  const auto placed = dmt::localize(img, box, model);
  // landmark 0: 0.25 + 2*0.1 = 0.45 in x, unchanged y
  REQUIRE(placed[0].x == Catch::Approx(10 + 0.45 * 40));
  REQUIRE(placed[0].y == Catch::Approx(10 + 0.25 * 40));
  // landmark 1: unchanged x, 0.75 - 0.2 = 0.55 in y
  REQUIRE(placed[1].x == Catch::Approx(10 + 0.75 * 40));
  REQUIRE(placed[1].y == Catch::Approx(10 + 0.55 * 40));
}

TEST_CASE("error normalizer prefers inter-ocular distance", "[ert]") {
  dmt::Shape big;
  big.landmarks.assign(68, {0.0, 0.0});
  big.landmarks[36] = {10.0, 0.0};
  big.landmarks[45] = {70.0, 0.0};
  REQUIRE(dmt::error_normalizer(big, {0, 0, 30, 40}) == Catch::Approx(60.0));

  dmt::Shape small;
  small.landmarks.assign(5, {3.0, 3.0});
  REQUIRE(dmt::error_normalizer(small, {0, 0, 30, 40}) == Catch::Approx(50.0));

  // 68-point shape with coincident eye corners falls back to the diagonal
  dmt::Shape flat;
  flat.landmarks.assign(68, {1.0, 1.0});
  REQUIRE(dmt::error_normalizer(flat, {0, 0, 30, 40}) == Catch::Approx(50.0));
}

TEST_CASE("evaluate_ert rejects datasets without parts", "[ert]") {
  testutil::TempDir tmp("ert");
  dmt::Rng rng(45);
  dmt::save_image(testutil::random_image(64, 64, rng), tmp.str("i.png"));
  dmt::AnnotatedDataset ds;
  dmt::ImageAnnotation img;
  img.path = tmp.str("i.png");
  img.width = 64;
  img.height = 64;
  dmt::BoxAnnotation box;
  box.x = 8, box.y = 8, box.w = 40, box.h = 40;  // no parts
  img.boxes.push_back(box);
  ds.images.push_back(img);

  dmt::ErtModel model;
  model.init_shape = shape_of({{0.5, 0.5}});
  REQUIRE_THROWS_AS(dmt::evaluate_ert(model, ds), dmt::ValidationError);
}
