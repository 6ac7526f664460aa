#pragma once

// Linear SVM training for the sliding-window detector. Positive examples
// come from annotated boxes mapped to their best pyramid level; negatives
// start as random non-overlapping windows and grow through hard-negative
// mining rounds. The optimizer is deterministic full-batch subgradient
// descent on the hinge-loss objective
//   L(w, b) = 0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i * (w . x_i - b))
// with step size 1/(lambda * t), lambda = 1/(C * m), and a backtracking
// halving guard that keeps the objective non-increasing.

#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/detector.hpp"
#include "dmt/hog.hpp"
#include "dmt/png_io.hpp"

namespace dmt {

struct DetectorTrainParams {
  double c = 5.0;          // hinge-loss trade-off
  double epsilon = 0.01;   // relative objective improvement to stop
  int target_size = kDefaultWindow;  // square window edge, pixels
  int upsample = 0;        // input upscaling steps before the pyramid
  std::uint64_t seed = kDefaultSeed;

  int negatives_per_positive = 4;  // initial random negatives
  int min_initial_negatives = 64;
  int mining_rounds = 2;
  double mining_threshold = -0.5;
  int mined_per_image = 10;
  std::size_t max_negatives = 6000;
  int max_epochs = 1200;
};

struct DetectorTrainLog {
  std::vector<std::vector<double>> objective;  // per round, per epoch
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
  std::size_t skipped_boxes = 0;  // aspect-incompatible or unplaceable
};

namespace detail {

struct WindowKey {
  int image = 0;
  int level = 0;
  int cx = 0;
  int cy = 0;
  friend auto operator<=>(const WindowKey&, const WindowKey&) = default;
};

struct TrainExample {
  std::vector<float> features;
  int label = 0;  // +1 / -1
};

inline void copy_window_features(const FeatureImage& f, int cx, int cy,
                                 int window_cells, std::vector<float>& out) {
  out.resize(std::size_t(window_cells) * window_cells * kCellFeatures);
  float* dst = out.data();
  for (int j = 0; j < window_cells; ++j) {
    const double* src = f.cell(cx, cy + j);
    for (int k = 0; k < window_cells * kCellFeatures; ++k)
      *dst++ = float(src[k]);
  }
}

// Pyramid level whose nominal scale brings sqrt(w*h) closest to the window.
inline int best_level_for_box(const Rect& box, std::size_t level_count,
                              int window) {
  const double size = std::sqrt(box.w * box.h);
  int best = 0;
  double best_gap = std::abs(size - window);
  double scale = 1.0;
  for (std::size_t l = 1; l < level_count; ++l) {
    scale *= 5.0 / 6.0;
    const double gap = std::abs(size * scale - window);
    if (gap < best_gap) {
      best_gap = gap;
      best = int(l);
    }
  }
  return best;
}

// Cell-aligned placement that centers the window on the scaled box center.
inline bool place_window(const Rect& box, double scale, int cells_x,
                         int cells_y, int window, int cell, int& cx, int& cy) {
  const int wc = window / cell;
  if (cells_x < wc || cells_y < wc) return false;
  const Vec2 center = box.center();
  cx = int(std::lround((center.x * scale - window / 2.0) / cell));
  cy = int(std::lround((center.y * scale - window / 2.0) / cell));
  cx = std::clamp(cx, 0, cells_x - wc);
  cy = std::clamp(cy, 0, cells_y - wc);
  return true;
}

struct ObjectiveTerms {
  double value = 0.0;          // L(w, b)
  std::vector<double> grad_w;  // subgradient, includes the ||w||^2 term
  double grad_b = 0.0;
};

inline ObjectiveTerms hinge_objective(const std::vector<TrainExample>& examples,
                                      const std::vector<double>& w, double b,
                                      double c, bool want_gradient) {
  ObjectiveTerms out;
  if (want_gradient) out.grad_w.assign(w.size(), 0.0);
  double hinge_sum = 0.0;
  for (const TrainExample& ex : examples) {
    double score = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k)
      score += w[k] * double(ex.features[k]);
    score -= b;
    const double margin = ex.label * score;
    if (margin >= 1.0) continue;
    hinge_sum += 1.0 - margin;
    if (want_gradient) {
      const double y = ex.label;
      for (std::size_t k = 0; k < w.size(); ++k)
        out.grad_w[k] -= c * y * double(ex.features[k]);
      out.grad_b += c * y;
    }
  }
  double norm2 = 0.0;
  for (double v : w) norm2 += v * v;
  out.value = 0.5 * norm2 + c * hinge_sum;
  if (want_gradient)
    for (std::size_t k = 0; k < w.size(); ++k) out.grad_w[k] += w[k];
  return out;
}

// Full-batch subgradient descent; returns the per-epoch objective values.
inline std::vector<double> optimize_hinge(
    const std::vector<TrainExample>& examples, std::vector<double>& w,
    double& b, const DetectorTrainParams& params) {
  const double m = double(examples.size());
  const double lambda = 1.0 / (params.c * m);
  std::vector<double> history;
  ObjectiveTerms current = hinge_objective(examples, w, b, params.c, true);
  history.push_back(current.value);

  std::vector<double> trial_w(w.size());
  for (int t = 1; t <= params.max_epochs; ++t) {
    double step = 1.0 / (lambda * double(t));
    double trial_b = b;
    ObjectiveTerms trial;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t k = 0; k < w.size(); ++k)
        trial_w[k] = w[k] - step * current.grad_w[k];
      trial_b = b - step * current.grad_b;
      trial = hinge_objective(examples, trial_w, trial_b, params.c, true);
      if (trial.value <= current.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction left at any step size
    w.swap(trial_w);
    b = trial_b;
    current = std::move(trial);
    history.push_back(current.value);

    // Converged when the improvement across the last ten epochs is small
    // relative to the current objective.
    const std::size_t window = 10;
    if (history.size() > window) {
      const double before = history[history.size() - 1 - window];
      const double now = history.back();
      if (before - now <= params.epsilon * std::max(1.0, std::fabs(now)))
        break;
    }
  }
  return history;
}

}  // namespace detail

inline DetectorModel train_detector(const AnnotatedDataset& ds,
                                    const DetectorTrainParams& params = {},
                                    DetectorTrainLog* log = nullptr) {
  if (ds.images.empty())
    throw TrainingDataError("train_detector: empty dataset");
  if (params.target_size < kCellSize)
    throw ValidationError("train_detector: target size below one cell");
  if (params.c <= 0) throw ValidationError("train_detector: c must be positive");

  const int window = params.target_size;
  const int cell = kCellSize;
  const int wc = window / cell;

  // Load images once; features are recomputed per pass (cheap next to the
  // optimizer) to keep memory proportional to the raw pixels.
  std::vector<GrayImage> images(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    GrayImage img = load_image(ds.images[i].path);
    for (int u = 0; u < params.upsample; ++u)
      img = resize_bilinear(img, img.width * 2, img.height * 2);
    images[i] = std::move(img);
  });
  const double upscale = std::pow(2.0, params.upsample);

  // Boxes too elongated for a square window are treated like ignore zones:
  // never positives, never negatives.
  auto usable = [](const BoxAnnotation& b) {
    if (b.ignore) return false;
    const double aspect = b.w / b.h;
    return aspect >= 2.0 / 3.0 && aspect <= 1.5;
  };

  std::vector<detail::TrainExample> examples;
  std::size_t positives = 0;
  std::size_t skipped = 0;

  for (std::size_t i = 0; i < images.size(); ++i) {
    const Pyramid pyr = build_pyramid(images[i], window);
    FeatureImage features;
    int cached_level = -1;
    for (const BoxAnnotation& ann : ds.images[i].boxes) {
      if (ann.ignore) continue;
      if (!usable(ann)) {
        ++skipped;
        continue;
      }
      Rect box = ann.rect();
      box.x *= upscale;
      box.y *= upscale;
      box.w *= upscale;
      box.h *= upscale;
      const int level =
          detail::best_level_for_box(box, pyr.levels.size(), window);
      const double scale = std::pow(5.0 / 6.0, level);
      if (cached_level != level) {
        features = extract_features(pyr.levels[std::size_t(level)]);
        cached_level = level;
      }
      int cx = 0, cy = 0;
      if (!detail::place_window(box, scale, features.cells_x, features.cells_y,
                                window, cell, cx, cy)) {
        ++skipped;
        continue;
      }
      detail::TrainExample ex;
      ex.label = 1;
      detail::copy_window_features(features, cx, cy, wc, ex.features);
      examples.push_back(std::move(ex));
      ++positives;
    }
  }
  if (positives == 0)
    throw TrainingDataError(
        "train_detector: no usable positive boxes (empty, ignore-only, or "
        "aspect-incompatible dataset)");

  // Initial negatives: random cell-aligned windows with zero overlap with
  // any annotated box, drawn with a per-image quota so each pyramid is
  // built once. Unfillable quota carries over to later images.
  Rng rng(params.seed);
  std::set<detail::WindowKey> used;
  const std::size_t target_negatives =
      std::max<std::size_t>(std::size_t(params.min_initial_negatives),
                            positives * std::size_t(params.negatives_per_positive));
  std::size_t negatives = 0;
  std::size_t deficit = 0;
  const std::size_t n_img = images.size();
  for (std::size_t i = 0; i < n_img && negatives < target_negatives; ++i) {
    const std::size_t quota = target_negatives / n_img +
                              (i < target_negatives % n_img ? 1 : 0) + deficit;
    if (quota == 0) continue;
    const Pyramid pyr = build_pyramid(images[i], window);
    std::vector<std::optional<FeatureImage>> level_features(pyr.levels.size());
    std::size_t got = 0;
    for (std::size_t attempt = 0; attempt < quota * 30 && got < quota;
         ++attempt) {
      const int level = int(rng.index(pyr.levels.size()));
      const GrayImage& lvl = pyr.levels[std::size_t(level)];
      const int cells_x = lvl.width / cell;
      const int cells_y = lvl.height / cell;
      if (cells_x < wc || cells_y < wc) continue;
      const int cx = int(rng.index(std::size_t(cells_x - wc + 1)));
      const int cy = int(rng.index(std::size_t(cells_y - wc + 1)));
      const detail::WindowKey key{int(i), level, cx, cy};
      if (used.contains(key)) continue;
      const double back = std::pow(6.0 / 5.0, level);
      const Rect win{cx * cell * back, cy * cell * back, window * back,
                     window * back};
      bool clear = true;
      for (const BoxAnnotation& ann : ds.images[i].boxes) {
        Rect b = ann.rect();
        b.x *= upscale;
        b.y *= upscale;
        b.w *= upscale;
        b.h *= upscale;
        if (intersection_area(win, b) > 0.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      used.insert(key);
      auto& features = level_features[std::size_t(level)];
      if (!features) features = extract_features(lvl);
      detail::TrainExample ex;
      ex.label = -1;
      detail::copy_window_features(*features, cx, cy, wc, ex.features);
      examples.push_back(std::move(ex));
      ++got;
      ++negatives;
    }
    deficit = quota - got;
  }

  DetectorModel model = DetectorModel::zeros(window);
  double bias = 0.0;
  std::vector<double> w(model.weight_count(), 0.0);
  DetectorTrainLog local_log;

  for (int round = 0; round <= params.mining_rounds; ++round) {
    if (round > 0 && negatives < params.max_negatives) {
      // Hard-negative mining: windows the current model scores above the
      // mining threshold that do not overlap a truth box.
      DetectorModel probe = model;
      probe.weights = w;
      probe.bias = bias;

      struct Mined {
        double score;
        detail::WindowKey key;
      };
      std::vector<std::vector<Mined>> found(images.size());
      parallel_for(images.size(), [&](std::size_t i) {
        const Pyramid pyr = build_pyramid(images[i], window);
        std::vector<Mined> local;
        for (std::size_t level = 0; level < pyr.levels.size(); ++level) {
          const GrayImage& lvl = pyr.levels[level];
          if (lvl.width < cell || lvl.height < cell) continue;
          const FeatureImage features = extract_features(lvl);
          const Saliency sal = score_map(features, probe);
          const double back = std::pow(6.0 / 5.0, double(level));
          for (int cy = 0; cy < sal.height; ++cy)
            for (int cx = 0; cx < sal.width; ++cx) {
              const double score = sal.at(cx, cy);
              if (score <= params.mining_threshold) continue;
              const Rect win{cx * cell * back, cy * cell * back,
                             window * back, window * back};
              bool is_negative = true;
              for (const BoxAnnotation& ann : ds.images[i].boxes) {
                Rect b = ann.rect();
                b.x *= upscale;
                b.y *= upscale;
                b.w *= upscale;
                b.h *= upscale;
                if (iou(win, b) > 0.5 ||
                    (ann.ignore && intersection_area(win, b) > 0)) {
                  is_negative = false;
                  break;
                }
              }
              if (is_negative)
                local.push_back(
                    {score, {int(i), int(level), cx, cy}});
            }
        }
        std::sort(local.begin(), local.end(), [](const Mined& a, const Mined& b) {
          if (a.score != b.score) return a.score > b.score;
          return a.key < b.key;
        });
        if (local.size() > std::size_t(params.mined_per_image))
          local.resize(std::size_t(params.mined_per_image));
        found[i] = std::move(local);
      });

      for (std::size_t i = 0;
           i < images.size() && negatives < params.max_negatives; ++i) {
        const Pyramid pyr = build_pyramid(images[i], window);
        FeatureImage features;
        int cached_level = -1;
        for (const Mined& m : found[i]) {
          if (negatives >= params.max_negatives) break;
          if (used.contains(m.key)) continue;
          used.insert(m.key);
          if (cached_level != m.key.level) {
            features = extract_features(pyr.levels[std::size_t(m.key.level)]);
            cached_level = m.key.level;
          }
          detail::TrainExample ex;
          ex.label = -1;
          detail::copy_window_features(features, m.key.cx, m.key.cy, wc,
                                       ex.features);
          examples.push_back(std::move(ex));
          ++negatives;
        }
      }
    }
    local_log.objective.push_back(
        detail::optimize_hinge(examples, w, bias, params));
  }

  model.weights = std::move(w);
  model.bias = bias;
  model.detection_threshold = 0.0;
  local_log.positive_count = positives;
  local_log.negative_count = negatives;
  local_log.skipped_boxes = skipped;
  if (log) *log = std::move(local_log);
  return model;
}

}  // namespace dmt
