#pragma once

// Mean Weight Matrix Aggregation: combines detectors trained on disjoint
// parts of a dataset into one detector by taking the element-wise mean of
// their weight matrices (and of bias and threshold), optionally weighted by
// integer multiplicities.

#include <span>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/detector.hpp"

namespace dmt {

namespace detail {

// Sums weighted per-model terms for one weight unit in a fixed order
// (|value| descending, then value) so the result is bit-identical for any
// permutation of the input models.
inline double ordered_weighted_mean(std::vector<double>& terms,
                                    double total_multiplicity) {
  std::sort(terms.begin(), terms.end(), [](double a, double b) {
    const double fa = std::fabs(a);
    const double fb = std::fabs(b);
    if (fa != fb) return fa > fb;
    return a > b;
  });
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / total_multiplicity;
}

}  // namespace detail

inline DetectorModel aggregate_mwma(std::span<const DetectorModel> models,
                                    std::span<const int> multiplicities = {}) {
  if (models.empty())
    throw ValidationError("aggregate_mwma: empty model list");
  if (!multiplicities.empty() && multiplicities.size() != models.size())
    throw ValidationError(
        "aggregate_mwma: multiplicity count does not match model count");
  for (int m : multiplicities)
    if (m < 1) throw ValidationError("aggregate_mwma: multiplicity must be >= 1");
  for (const DetectorModel& m : models) {
    if (m.weights.size() != m.weight_count())
      throw ValidationError("aggregate_mwma: malformed model weights");
    if (!m.compatible_with(models.front()))
      throw IncompatibleModelsError(
          "aggregate_mwma: models disagree on window size or extractor "
          "settings");
  }
  // The mean of a single model is that model, bit for bit.
  if (models.size() == 1) return models.front();

  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i)
    total += multiplicities.empty() ? 1.0 : double(multiplicities[i]);

  auto mult = [&](std::size_t i) {
    return multiplicities.empty() ? 1.0 : double(multiplicities[i]);
  };

  DetectorModel out = models.front();
  std::vector<double> terms(models.size());
  for (std::size_t u = 0; u < out.weights.size(); ++u) {
    for (std::size_t i = 0; i < models.size(); ++i)
      terms[i] = models[i].weights[u] * mult(i);
    out.weights[u] = detail::ordered_weighted_mean(terms, total);
  }
  for (std::size_t i = 0; i < models.size(); ++i)
    terms[i] = models[i].bias * mult(i);
  out.bias = detail::ordered_weighted_mean(terms, total);
  for (std::size_t i = 0; i < models.size(); ++i)
    terms[i] = models[i].detection_threshold * mult(i);
  out.detection_threshold = detail::ordered_weighted_mean(terms, total);
  return out;
}

inline DetectorModel aggregate_mwma(const std::vector<DetectorModel>& models,
                                    const std::vector<int>& multiplicities = {}) {
  return aggregate_mwma(std::span<const DetectorModel>(models),
                        std::span<const int>(multiplicities));
}

}  // namespace dmt
