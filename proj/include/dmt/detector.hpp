#pragma once

// Sliding-window linear classifier over HOG feature images: saliency score
// maps, multi-scale detection with non-maximum suppression, and
// recall/precision evaluation against annotated datasets.

#include <span>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/hog.hpp"

namespace dmt {

struct DetectorModel {
  std::vector<double> weights;  // indexed (cell_y, cell_x, feature)
  double bias = 0.0;
  double detection_threshold = 0.0;
  int window = kDefaultWindow;  // pixels, square
  ExtractorConfig extractor;

  int window_cells() const { return window / extractor.cell_size; }
  std::size_t weight_count() const {
    return std::size_t(window_cells()) * window_cells() * kCellFeatures;
  }
  double& weight(int cy, int cx, int f) {
    return weights[(std::size_t(cy) * window_cells() + cx) * kCellFeatures + f];
  }
  double weight(int cy, int cx, int f) const {
    return weights[(std::size_t(cy) * window_cells() + cx) * kCellFeatures + f];
  }

  static DetectorModel zeros(int window = kDefaultWindow) {
    DetectorModel m;
    m.window = window;
    m.weights.assign(m.weight_count(), 0.0);
    return m;
  }

  bool compatible_with(const DetectorModel& o) const {
    return window == o.window && extractor == o.extractor &&
           weights.size() == o.weights.size();
  }
};

struct Detection {
  Rect box;  // original-image pixel coordinates
  double score = 0.0;
  int model_index = 0;
};

struct Saliency {
  int width = 0;   // valid window placements along x, in cells
  int height = 0;
  std::vector<double> scores;

  double at(int cx, int cy) const {
    return scores[std::size_t(cy) * width + cx];
  }
};

// Scores every window placement with a separable two-pass scheme: a row
// pass collapses each filter row against each feature row, a column pass
// sums the per-row accumulators down the window. Same result as the direct
// per-window dot product, at one tenth of the multiplies.
inline Saliency score_map(const FeatureImage& features,
                          const DetectorModel& model) {
  const int wc = model.window_cells();
  Saliency sal;
  sal.width = features.cells_x - wc + 1;
  sal.height = features.cells_y - wc + 1;
  if (sal.width <= 0 || sal.height <= 0) {
    sal = Saliency{};
    return sal;  // image smaller than the window: no placements
  }
  sal.scores.assign(std::size_t(sal.width) * sal.height, 0.0);

  // row_acc[r][x][j] = filter row j against feature row r at window column x.
  std::vector<double> row_acc(
      std::size_t(features.cells_y) * sal.width * wc, 0.0);
  for (int r = 0; r < features.cells_y; ++r) {
    for (int x = 0; x < sal.width; ++x) {
      double* acc = &row_acc[(std::size_t(r) * sal.width + x) * wc];
      for (int i = 0; i < wc; ++i) {
        const double* cell = features.cell(x + i, r);
        for (int j = 0; j < wc; ++j) {
          const double* w =
              &model.weights[(std::size_t(j) * wc + i) * kCellFeatures];
          double s = 0.0;
          for (int f = 0; f < kCellFeatures; ++f) s += cell[f] * w[f];
          acc[j] += s;
        }
      }
    }
  }
  for (int y = 0; y < sal.height; ++y) {
    for (int x = 0; x < sal.width; ++x) {
      double s = 0.0;
      for (int j = 0; j < wc; ++j)
        s += row_acc[(std::size_t(y + j) * sal.width + x) * wc + j];
      sal.scores[std::size_t(y) * sal.width + x] = s - model.bias;
    }
  }
  return sal;
}

// Reference single-window score; the two-pass map must agree with this.
inline double score_window(const FeatureImage& features,
                           const DetectorModel& model, int cx, int cy) {
  const int wc = model.window_cells();
  double s = 0.0;
  for (int j = 0; j < wc; ++j)
    for (int i = 0; i < wc; ++i) {
      const double* cell = features.cell(cx + i, cy + j);
      const double* w =
          &model.weights[(std::size_t(j) * wc + i) * kCellFeatures];
      for (int f = 0; f < kCellFeatures; ++f) s += cell[f] * w[f];
    }
  return s - model.bias;
}

// Greedy non-maximum suppression: keep in descending score order, drop any
// candidate overlapping a kept box by IoU > 0.5. Ties break on position so
// the result is deterministic.
inline std::vector<Detection> non_max_suppression(
    std::vector<Detection> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const Detection& a, const Detection& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.box.x != b.box.x) return a.box.x < b.box.x;
              if (a.box.y != b.box.y) return a.box.y < b.box.y;
              if (a.box.w != b.box.w) return a.box.w < b.box.w;
              return a.model_index < b.model_index;
            });
  std::vector<Detection> kept;
  for (const Detection& c : candidates) {
    bool suppressed = false;
    for (const Detection& k : kept)
      if (iou(k.box, c.box) > 0.5) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

// Runs one or more detectors (a "combined model") over the image pyramid.
// All models must share window size and extractor settings. Windows whose
// score exceeds the model's threshold become candidates; one NMS pass over
// the union produces the final list, sorted by descending score.
inline std::vector<Detection> detect(const GrayImage& image,
                                     std::span<const DetectorModel> models) {
  if (models.empty()) throw ValidationError("detect: no models given");
  for (const DetectorModel& m : models) {
    if (m.weights.size() != m.weight_count())
      throw ValidationError("detect: model weight count does not match window");
    if (!m.compatible_with(models.front()))
      throw IncompatibleModelsError(
          "detect: models disagree on window size or extractor settings");
  }
  const int window = models.front().window;
  const int cell = models.front().extractor.cell_size;
  const Pyramid pyr = build_pyramid(image, window);

  std::vector<Detection> candidates;
  for (std::size_t level = 0; level < pyr.levels.size(); ++level) {
    const GrayImage& lvl = pyr.levels[level];
    if (lvl.width < cell || lvl.height < cell) continue;
    const FeatureImage features = extract_features(lvl);
    const double back = pyr.scale_to_original(level);
    for (int mi = 0; mi < int(models.size()); ++mi) {
      const Saliency sal = score_map(features, models[mi]);
      for (int cy = 0; cy < sal.height; ++cy)
        for (int cx = 0; cx < sal.width; ++cx) {
          const double score = sal.at(cx, cy);
          if (score > models[mi].detection_threshold)
            candidates.push_back(
                {Rect{cx * cell * back, cy * cell * back, window * back,
                      window * back},
                 score, mi});
        }
    }
  }
  return non_max_suppression(std::move(candidates));
}

inline std::vector<Detection> detect(const GrayImage& image,
                                     const DetectorModel& model) {
  return detect(image, std::span<const DetectorModel>(&model, 1));
}

// -------------------------------------------------------------- evaluation

struct EvaluationReport {
  long true_positives = 0;
  long false_positives = 0;
  long false_negatives = 0;
  double recall = 1.0;
  double precision = 1.0;
  bool recall_undefined = false;     // no ground-truth boxes
  bool precision_undefined = false;  // no detections

  void finalize() {
    recall_undefined = (true_positives + false_negatives) == 0;
    precision_undefined = (true_positives + false_positives) == 0;
    recall = recall_undefined
                 ? 1.0
                 : double(true_positives) /
                       double(true_positives + false_negatives);
    precision = precision_undefined
                    ? 1.0
                    : double(true_positives) /
                          double(true_positives + false_positives);
  }
};

// Greedy matching per image: detections in descending score order claim the
// best still-unmatched truth box with IoU > 0.5. Unclaimed detections that
// overlap an ignore box by IoU > 0.5 are discarded, the rest are false
// positives; unmatched truth boxes are false negatives.
inline void match_detections(const std::vector<Detection>& detections,
                             const std::vector<BoxAnnotation>& boxes,
                             EvaluationReport& report) {
  std::vector<const BoxAnnotation*> truths;
  std::vector<Rect> ignores;
  for (const BoxAnnotation& b : boxes) {
    if (b.ignore)
      ignores.push_back(b.rect());
    else
      truths.push_back(&b);
  }

  std::vector<bool> matched(truths.size(), false);
  for (const Detection& det : detections) {
    double best = 0.5;
    int best_idx = -1;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (matched[t]) continue;
      const double overlap = iou(det.box, truths[t]->rect());
      if (overlap > best) {
        best = overlap;
        best_idx = int(t);
      }
    }
    if (best_idx >= 0) {
      matched[std::size_t(best_idx)] = true;
      ++report.true_positives;
      continue;
    }
    bool ignored = false;
    for (const Rect& ig : ignores)
      if (iou(det.box, ig) > 0.5) {
        ignored = true;
        break;
      }
    if (!ignored) ++report.false_positives;
  }
  for (bool m : matched)
    if (!m) ++report.false_negatives;
}

inline EvaluationReport evaluate_detector(std::span<const DetectorModel> models,
                                          const AnnotatedDataset& ds) {
  struct Counts {
    long tp = 0, fp = 0, fn = 0;
  };
  std::vector<Counts> slots(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    const ImageAnnotation& img = ds.images[i];
    const std::vector<Detection> dets = detect(load_image(img.path), models);
    EvaluationReport local;
    match_detections(dets, img.boxes, local);
    slots[i] = {local.true_positives, local.false_positives,
                local.false_negatives};
  });
  EvaluationReport report;
  for (const Counts& c : slots) {
    report.true_positives += c.tp;
    report.false_positives += c.fp;
    report.false_negatives += c.fn;
  }
  report.finalize();
  return report;
}

inline EvaluationReport evaluate_detector(const DetectorModel& model,
                                          const AnnotatedDataset& ds) {
  return evaluate_detector(std::span<const DetectorModel>(&model, 1), ds);
}

}  // namespace dmt
