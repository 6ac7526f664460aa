#pragma once

// Ensemble-of-regression-trees landmark localization. Shapes are stored in
// face-box coordinates (unit square); each cascade level re-anchors its
// feature points via the similarity transform between the model's reference
// shape and the current estimate, samples pixel intensities at the warped
// anchors, and walks a gradient-boosted forest whose leaves carry additive
// shape corrections.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/image.hpp"

namespace dmt {

// ----------------------------------------------------- similarity transform

struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  Vec2 translation{0.0, 0.0};

  // Rotation and scale only; used for direction-like quantities.
  Vec2 rotate_scale(const Vec2& v) const {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    return {scale * (c * v.x - s * v.y), scale * (s * v.x + c * v.y)};
  }

  Vec2 apply(const Vec2& p) const { return rotate_scale(p) + translation; }
};

// Least-squares similarity (scale, rotation, translation) mapping `from`
// onto `to`, in closed form. Throws if the source has no spread or the
// shapes disagree in length.
inline SimilarityTransform similarity_transform(const Shape& from,
                                                const Shape& to) {
  const std::size_t n = from.size();
  if (n != to.size() || n < 2)
    throw DegenerateInputError(
        "similarity_transform: shapes must share a length of at least 2");
  Vec2 mean_p{}, mean_q{};
  for (std::size_t i = 0; i < n; ++i) {
    mean_p += from[i];
    mean_q += to[i];
  }
  mean_p *= 1.0 / double(n);
  mean_q *= 1.0 / double(n);

  double spread = 0.0, a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = from[i] - mean_p;
    const Vec2 q = to[i] - mean_q;
    spread += p.norm2();
    a += p.dot(q);
    b += p.cross(q);
  }
  if (spread == 0.0)
    throw DegenerateInputError("similarity_transform: source has no spread");

  SimilarityTransform t;
  t.rotation = std::atan2(b, a);
  t.scale = std::sqrt(a * a + b * b) / spread;
  t.translation = mean_q - t.rotate_scale(mean_p);
  return t;
}

// --------------------------------------------------------- box coordinates

inline Vec2 box_normalize(const Vec2& p, const Rect& box) {
  return {(p.x - box.x) / box.w, (p.y - box.y) / box.h};
}

inline Vec2 box_denormalize(const Vec2& p, const Rect& box) {
  return {box.x + p.x * box.w, box.y + p.y * box.h};
}

inline Shape box_normalize(const Shape& s, const Rect& box) {
  Shape out;
  out.landmarks.reserve(s.size());
  for (const Vec2& p : s.landmarks) out.landmarks.push_back(box_normalize(p, box));
  return out;
}

inline Shape box_denormalize(const Shape& s, const Rect& box) {
  Shape out;
  out.landmarks.reserve(s.size());
  for (const Vec2& p : s.landmarks)
    out.landmarks.push_back(box_denormalize(p, box));
  return out;
}

// ------------------------------------------------------------------- trees

struct SplitNode {
  std::uint32_t feature_a = 0;
  std::uint32_t feature_b = 0;
  double threshold = 0.0;
};

// Complete binary tree stored breadth-first: node i has children 2i+1 and
// 2i+2; once the index leaves `splits` it names leaf (index - splits.size()).
struct RegressionTree {
  std::vector<SplitNode> splits;
  std::vector<std::vector<Vec2>> leaves;  // per-leaf landmark deltas

  std::size_t traverse(std::span<const float> features) const {
    std::size_t i = 0;
    while (i < splits.size()) {
      const SplitNode& s = splits[i];
      const double diff =
          double(features[s.feature_a]) - double(features[s.feature_b]);
      i = diff > s.threshold ? 2 * i + 1 : 2 * i + 2;
    }
    return i - splits.size();
  }
};

struct FeatureAnchor {
  std::uint32_t landmark = 0;  // nearest reference landmark
  Vec2 offset{};               // displacement from it, reference coordinates
};

struct CascadeLevel {
  std::vector<FeatureAnchor> anchors;
  std::vector<RegressionTree> forest;
};

struct ErtModel {
  Shape init_shape;  // face-box coordinates; also the anchor reference
  std::vector<CascadeLevel> cascades;

  std::size_t landmark_count() const { return init_shape.size(); }
};

// ---------------------------------------------------------------- sampling

// Intensities under the level's anchors, warped from reference coordinates
// to the current estimate by the reference->current similarity transform.
// Sample points round to the nearest pixel and clamp to the image.
inline void sample_pixel_features(const GrayImage& image, const Rect& box,
                                  const Shape& reference, const Shape& current,
                                  const CascadeLevel& level,
                                  std::vector<float>& out) {
  const SimilarityTransform warp = similarity_transform(reference, current);
  out.resize(level.anchors.size());
  for (std::size_t i = 0; i < level.anchors.size(); ++i) {
    const FeatureAnchor& anchor = level.anchors[i];
    const Vec2 p = current[anchor.landmark] + warp.rotate_scale(anchor.offset);
    const Vec2 q = box_denormalize(p, box);
    const int px = int(std::lround(q.x));
    const int py = int(std::lround(q.y));
    out[i] = image.at_clamped(px, py);
  }
}

// --------------------------------------------------------------- inference

// Runs the cascade from an explicit starting shape (face-box coordinates).
// The starting shape also serves as the anchor reference, so aggregated
// models can re-seat every subdivision on a shared initialization.
inline Shape localize_with_init(const GrayImage& image, const Rect& face_box,
                                const ErtModel& model, const Shape& init) {
  if (model.landmark_count() == 0)
    throw DegenerateInputError("localize: model has no landmarks");
  if (init.size() != model.landmark_count())
    throw IncompatibleModelsError(
        "localize: init shape length does not match the model");
  if (face_box.w <= 0 || face_box.h <= 0 || face_box.x < 0 || face_box.y < 0 ||
      face_box.right() > image.width || face_box.bottom() > image.height)
    throw ValidationError("localize: face box does not lie inside the image");

  Shape current = init;
  std::vector<float> features;
  for (const CascadeLevel& level : model.cascades) {
    sample_pixel_features(image, face_box, init, current, level, features);
    for (const RegressionTree& tree : level.forest) {
      const std::vector<Vec2>& leaf = tree.leaves[tree.traverse(features)];
      for (std::size_t l = 0; l < current.size(); ++l) current[l] += leaf[l];
    }
  }
  return box_denormalize(current, face_box);
}

inline Shape localize(const GrayImage& image, const Rect& face_box,
                      const ErtModel& model) {
  return localize_with_init(image, face_box, model, model.init_shape);
}

// -------------------------------------------------------------- evaluation

// Normalizer for the localization error: the inter-ocular distance when the
// shape has the 68-point eye corners, the face-box diagonal otherwise.
inline double error_normalizer(const Shape& truth, const Rect& box) {
  if (truth.size() >= 46) {
    const double d = distance(truth[36], truth[45]);
    if (d > 0) return d;
  }
  return std::sqrt(box.w * box.w + box.h * box.h);
}

// Mean over annotated boxes of the mean per-landmark Euclidean deviation,
// normalized per sample. `run` maps (image, box) to a placed shape.
template <class Localizer>
double mean_normalized_error(const AnnotatedDataset& ds, Localizer&& run) {
  struct Slot {
    double sum = 0.0;
    long count = 0;
  };
  std::vector<Slot> slots(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    const ImageAnnotation& ann = ds.images[i];
    bool loaded = false;
    GrayImage image;
    for (const BoxAnnotation& box : ann.boxes) {
      if (box.ignore || !box.has_parts()) continue;
      if (!loaded) {
        image = load_image(ann.path);
        loaded = true;
      }
      const Shape truth = box.shape();
      const Shape placed = run(image, box.rect());
      double err = 0.0;
      for (std::size_t l = 0; l < truth.size(); ++l)
        err += distance(placed[l], truth[l]);
      err /= double(truth.size());
      slots[i].sum += err / error_normalizer(truth, box.rect());
      ++slots[i].count;
    }
  });
  double total = 0.0;
  long samples = 0;
  for (const Slot& s : slots) {
    total += s.sum;
    samples += s.count;
  }
  if (samples == 0)
    throw ValidationError(
        "evaluate: dataset has no annotated face boxes with parts");
  return total / double(samples);
}

inline double evaluate_ert(const ErtModel& model, const AnnotatedDataset& ds) {
  return mean_normalized_error(ds, [&](const GrayImage& img, const Rect& box) {
    return localize(img, box, model);
  });
}

}  // namespace dmt
