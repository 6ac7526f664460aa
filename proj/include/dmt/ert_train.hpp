#pragma once

// Trains the regression-tree cascade by gradient boosting. Every training
// unit is oversampled with starting shapes drawn from other units; each
// cascade level draws a fresh pixel pool in the reference frame, anchors
// the pool points to their nearest reference landmark, and fits its forest
// on pixel-difference features. Split candidates sample pixel pairs with a
// locality prior exp(-lambda * distance); thresholds are drawn uniformly
// between the observed extreme feature differences at the node; the chosen
// split maximizes |L|*||mean_L||^2 + |R|*||mean_R||^2 over the node's
// residuals. Leaves shrink the mean residual by nu.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/ert.hpp"
#include "dmt/png_io.hpp"

namespace dmt {

struct ErtTrainParams {
  int oversampling = 20;
  double nu = 0.1;
  int tree_depth = 5;  // layers walked per lookup, leaf layer included
  int feature_pool_size = 400;
  int test_splits = 20;
  int cascades = 10;
  int trees_per_cascade = 500;
  double lambda = 0.1;
  std::uint64_t seed = kDefaultSeed;
};

struct ErtTrainLog {
  // Mean squared residual (face-box units) after each cascade level.
  std::vector<double> level_mse;
  std::size_t sample_count = 0;
};

namespace detail {

struct ErtSample {
  std::uint32_t image = 0;
  Rect box;
  Shape target;   // face-box coordinates
  Shape current;  // face-box coordinates
};

// Splits a node's sample range in place (left side first) and returns the
// boundary. Stable, so sample order inside each side is deterministic.
inline std::size_t partition_node(std::vector<std::uint32_t>& order,
                                  std::size_t begin, std::size_t end,
                                  const std::vector<std::vector<float>>& feats,
                                  const SplitNode& split) {
  auto goes_left = [&](std::uint32_t s) {
    return double(feats[s][split.feature_a]) -
               double(feats[s][split.feature_b]) >
           split.threshold;
  };
  std::vector<std::uint32_t> left, right;
  left.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i)
    (goes_left(order[i]) ? left : right).push_back(order[i]);
  std::size_t pos = begin;
  for (std::uint32_t s : left) order[pos++] = s;
  const std::size_t boundary = pos;
  for (std::uint32_t s : right) order[pos++] = s;
  return boundary;
}

inline RegressionTree fit_tree(const std::vector<ErtSample>& samples,
                               const std::vector<std::vector<float>>& feats,
                               const std::vector<std::vector<Vec2>>& residuals,
                               const std::vector<Vec2>& pool,
                               const ErtTrainParams& params, Rng& rng) {
  const std::size_t n_splits = (std::size_t(1) << (params.tree_depth - 1)) - 1;
  const std::size_t n_leaves = n_splits + 1;
  const std::size_t landmarks = residuals.front().size();

  RegressionTree tree;
  tree.splits.resize(n_splits);
  tree.leaves.assign(n_leaves, std::vector<Vec2>(landmarks, Vec2{}));

  std::vector<std::uint32_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::uint32_t(i);
  // Breadth-first node ranges over `order`.
  std::vector<std::pair<std::size_t, std::size_t>> ranges(n_splits + n_leaves,
                                                          {0, 0});
  ranges[0] = {0, samples.size()};

  std::vector<Vec2> left_sum(landmarks);
  for (std::size_t node = 0; node < n_splits; ++node) {
    const auto [begin, end] = ranges[node];
    SplitNode best{0, 0, std::numeric_limits<double>::infinity()};
    if (end - begin >= 2) {
      // Total residual over the node, for right-side sums by subtraction.
      std::vector<Vec2> total(landmarks, Vec2{});
      for (std::size_t i = begin; i < end; ++i)
        for (std::size_t l = 0; l < landmarks; ++l)
          total[l] += residuals[order[i]][l];

      double best_score = -1.0;
      for (int cand = 0; cand < params.test_splits; ++cand) {
        // Pixel pair with locality prior; resample until accepted.
        std::uint32_t a = 0, b = 0;
        for (int tries = 0; tries < 100; ++tries) {
          a = std::uint32_t(rng.index(pool.size()));
          b = std::uint32_t(rng.index(pool.size()));
          if (a == b) continue;
          const double dist = distance(pool[a], pool[b]);
          if (rng.uniform() < std::exp(-params.lambda * dist)) break;
        }
        if (a == b) continue;

        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
          const double d = double(feats[order[i]][a]) -
                           double(feats[order[i]][b]);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
        const double threshold = rng.uniform(lo, hi);

        std::fill(left_sum.begin(), left_sum.end(), Vec2{});
        std::size_t left_count = 0;
        for (std::size_t i = begin; i < end; ++i) {
          const double d = double(feats[order[i]][a]) -
                           double(feats[order[i]][b]);
          if (d > threshold) {
            ++left_count;
            for (std::size_t l = 0; l < landmarks; ++l)
              left_sum[l] += residuals[order[i]][l];
          }
        }
        const std::size_t right_count = (end - begin) - left_count;
        double score = 0.0;
        if (left_count > 0) {
          double norm2 = 0.0;
          for (const Vec2& v : left_sum) norm2 += v.norm2();
          score += norm2 / double(left_count);
        }
        if (right_count > 0) {
          double norm2 = 0.0;
          for (std::size_t l = 0; l < landmarks; ++l)
            norm2 += (total[l] - left_sum[l]).norm2();
          score += norm2 / double(right_count);
        }
        if (score > best_score) {
          best_score = score;
          best = {a, b, threshold};
        }
      }
    }
    tree.splits[node] = best;
    const std::size_t boundary = partition_node(order, begin, end, feats, best);
    ranges[2 * node + 1] = {begin, boundary};
    ranges[2 * node + 2] = {boundary, end};
  }

  for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
    const auto [begin, end] = ranges[n_splits + leaf];
    if (begin == end) continue;
    std::vector<Vec2>& value = tree.leaves[leaf];
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t l = 0; l < landmarks; ++l)
        value[l] += residuals[order[i]][l];
    const double scale = params.nu / double(end - begin);
    for (Vec2& v : value) v *= scale;
  }
  return tree;
}

}  // namespace detail

inline ErtModel train_ert(const AnnotatedDataset& ds,
                          const ErtTrainParams& params = {},
                          ErtTrainLog* log = nullptr) {
  if (params.tree_depth < 2 || params.tree_depth > 16)
    throw ValidationError("train_ert: tree depth out of range");
  if (params.feature_pool_size < 2)
    throw ValidationError("train_ert: feature pool too small");
  if (params.oversampling < 1)
    throw ValidationError("train_ert: oversampling must be >= 1");

  // Collect training units: every non-ignore box with parts.
  struct Unit {
    std::uint32_t image;
    Rect box;
    Shape shape;  // face-box coordinates
  };
  std::vector<Unit> units;
  std::size_t landmarks = 0;
  for (std::uint32_t i = 0; i < ds.images.size(); ++i) {
    for (const BoxAnnotation& box : ds.images[i].boxes) {
      if (box.ignore || !box.has_parts()) continue;
      if (landmarks == 0) landmarks = box.parts.size();
      if (box.parts.size() != landmarks)
        throw TrainingDataError("train_ert: inconsistent landmark counts");
      units.push_back({i, box.rect(), box_normalize(box.shape(), box.rect())});
    }
  }
  if (units.empty())
    throw TrainingDataError("train_ert: no annotated shapes in the dataset");

  std::vector<GrayImage> images(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    images[i] = load_image(ds.images[i].path);
  });

  ErtModel model;
  model.init_shape.landmarks.assign(landmarks, Vec2{});
  for (const Unit& u : units)
    for (std::size_t l = 0; l < landmarks; ++l)
      model.init_shape[l] += u.shape[l];
  for (std::size_t l = 0; l < landmarks; ++l)
    model.init_shape[l] *= 1.0 / double(units.size());

  Rng rng(params.seed);

  // Oversample: each unit starts from other units' ground truths. With a
  // single unit there is no other shape to borrow, so every start is the
  // mean shape itself — training then only has to preserve the exact
  // landing, which keeps one-image training reproducible to fp precision.
  std::vector<detail::ErtSample> samples;
  samples.reserve(units.size() * std::size_t(params.oversampling));
  for (std::uint32_t u = 0; u < units.size(); ++u) {
    for (int o = 0; o < params.oversampling; ++o) {
      detail::ErtSample s;
      s.image = units[u].image;
      s.box = units[u].box;
      s.target = units[u].shape;
      if (units.size() > 1) {
        std::size_t other = rng.index(units.size() - 1);
        if (other >= u) ++other;
        s.current = units[other].shape;
      } else {
        s.current = model.init_shape;
      }
      samples.push_back(std::move(s));
    }
  }

  const Rect ref_box = model.init_shape.bounding_box();
  if (ref_box.w <= 0 || ref_box.h <= 0)
    throw TrainingDataError("train_ert: degenerate mean shape");

  ErtTrainLog local_log;
  local_log.sample_count = samples.size();

  std::vector<std::vector<float>> feats(samples.size());
  std::vector<std::vector<Vec2>> residuals(samples.size(),
                                           std::vector<Vec2>(landmarks));
  model.cascades.resize(std::size_t(params.cascades));
  for (int level_idx = 0; level_idx < params.cascades; ++level_idx) {
    CascadeLevel& level = model.cascades[std::size_t(level_idx)];

    // Fresh pixel pool in the reference frame, anchored to the nearest
    // reference landmark.
    std::vector<Vec2> pool(std::size_t(params.feature_pool_size));
    level.anchors.resize(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) {
      pool[p] = {rng.uniform(ref_box.x, ref_box.right()),
                 rng.uniform(ref_box.y, ref_box.bottom())};
      std::uint32_t nearest = 0;
      double best = distance(pool[p], model.init_shape[0]);
      for (std::uint32_t l = 1; l < landmarks; ++l) {
        const double d = distance(pool[p], model.init_shape[l]);
        if (d < best) {
          best = d;
          nearest = l;
        }
      }
      level.anchors[p] = {nearest, pool[p] - model.init_shape[nearest]};
    }

    parallel_for(samples.size(), [&](std::size_t s) {
      sample_pixel_features(images[samples[s].image], samples[s].box,
                            model.init_shape, samples[s].current, level,
                            feats[s]);
      for (std::size_t l = 0; l < landmarks; ++l)
        residuals[s][l] = samples[s].target[l] - samples[s].current[l];
    });

    level.forest.reserve(std::size_t(params.trees_per_cascade));
    for (int t = 0; t < params.trees_per_cascade; ++t) {
      RegressionTree tree =
          detail::fit_tree(samples, feats, residuals, pool, params, rng);
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const std::vector<Vec2>& leaf = tree.leaves[tree.traverse(feats[s])];
        for (std::size_t l = 0; l < landmarks; ++l) {
          samples[s].current[l] += leaf[l];
          residuals[s][l] -= leaf[l];
        }
      }
      level.forest.push_back(std::move(tree));
    }

    double mse = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      double r2 = 0.0;
      for (const Vec2& r : residuals[s]) r2 += r.norm2();
      mse += r2 / double(landmarks);
    }
    local_log.level_mse.push_back(mse / double(samples.size()));
  }

  if (log) *log = std::move(local_log);
  return model;
}

}  // namespace dmt
