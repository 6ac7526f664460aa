#pragma once

// Weighted Bins Aggregation: combines landmark models trained on disjoint
// subdivisions of a dataset. Every subdivision's cascade is kept intact;
// at inference each runs from a shared mean initialization and the results
// are blended per landmark with deviation weights.

#include <span>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/ert.hpp"

namespace dmt {

struct AggregatedErtModel {
  std::vector<ErtModel> subdivisions;
  std::vector<double> deviations;
  double total_deviation = 0.0;
  Shape init_shape;  // unweighted per-landmark mean of subdivision inits

  std::size_t landmark_count() const { return init_shape.size(); }
};

inline AggregatedErtModel aggregate_wba(std::vector<ErtModel> models,
                                        std::vector<double> deviations = {}) {
  if (models.empty()) throw ValidationError("aggregate_wba: empty model list");
  if (!deviations.empty() && deviations.size() != models.size())
    throw ValidationError(
        "aggregate_wba: deviation count does not match model count");
  if (deviations.empty()) deviations.assign(models.size(), 1.0);
  for (double d : deviations)
    if (!(d > 0.0))
      throw ValidationError("aggregate_wba: deviations must be positive");
  const std::size_t landmarks = models.front().landmark_count();
  if (landmarks == 0)
    throw DegenerateInputError("aggregate_wba: model has no landmarks");
  for (const ErtModel& m : models)
    if (m.landmark_count() != landmarks)
      throw IncompatibleModelsError(
          "aggregate_wba: models disagree on landmark count");

  AggregatedErtModel out;
  out.init_shape.landmarks.assign(landmarks, Vec2{});
  for (const ErtModel& m : models)
    for (std::size_t l = 0; l < landmarks; ++l)
      out.init_shape[l] += m.init_shape[l];
  for (std::size_t l = 0; l < landmarks; ++l)
    out.init_shape[l] *= 1.0 / double(models.size());

  out.total_deviation = 0.0;
  for (double d : deviations) out.total_deviation += d;
  out.subdivisions = std::move(models);
  out.deviations = std::move(deviations);
  return out;
}

// Each subdivision runs its full cascade from the shared init shape; the
// per-landmark bins accumulate deviation-weighted results in fixed
// subdivision order and divide by the total deviation.
inline Shape localize_wba(const GrayImage& image, const Rect& face_box,
                          const AggregatedErtModel& model) {
  if (model.subdivisions.empty())
    throw DegenerateInputError("localize_wba: model has no subdivisions");
  std::vector<Vec2> bins(model.landmark_count(), Vec2{});
  for (std::size_t k = 0; k < model.subdivisions.size(); ++k) {
    const Shape placed = localize_with_init(image, face_box,
                                            model.subdivisions[k],
                                            model.init_shape);
    for (std::size_t l = 0; l < bins.size(); ++l)
      bins[l] += placed[l] * model.deviations[k];
  }
  Shape out;
  out.landmarks.resize(bins.size());
  for (std::size_t l = 0; l < bins.size(); ++l)
    out.landmarks[l] = bins[l] / model.total_deviation;
  return out;
}

inline double evaluate_ert(const AggregatedErtModel& model,
                           const AnnotatedDataset& ds) {
  return mean_normalized_error(ds, [&](const GrayImage& img, const Rect& box) {
    return localize_wba(img, box, model);
  });
}

}  // namespace dmt
