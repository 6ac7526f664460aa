#pragma once

// Eyeblink conditioning support: eye aspect ratio (EAR) from a 68-point
// (or larger 48+) landmark shape, trace normalization to closure
// percentages, and end-to-end tracing of a frame sequence through a
// detector plus landmark model.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/detector.hpp"
#include "dmt/ert.hpp"
#include "dmt/wba.hpp"

namespace dmt {

// EAR over the right-eye landmarks LM43..LM48 (1-based scheme, indices
// 42..47 here): vertical gap pairs (44,48) and (45,47) over twice the
// corner distance (43,46).
inline double eye_aspect_ratio(const Shape& shape) {
  if (shape.size() < 48)
    throw DegenerateInputError(
        "eye_aspect_ratio: shape needs at least 48 landmarks");
  const double horizontal = distance(shape[42], shape[45]);
  if (horizontal == 0.0)
    throw DegenerateInputError("eye_aspect_ratio: coincident eye corners");
  return (distance(shape[43], shape[47]) + distance(shape[44], shape[46])) /
         (2.0 * horizontal);
}

struct EarSample {
  double time = 0.0;  // seconds
  double ear = 0.0;
  bool held = false;  // value carried over from the last detected frame
};

struct TraceSample {
  double time = 0.0;
  double ear = 0.0;
  double closure = 0.0;  // percent, 100 = fully closed
  bool held = false;
};

struct BlinkTrace {
  std::vector<TraceSample> samples;
  double min_ear = 0.0;
  double max_ear = 0.0;
};

// Maps raw EAR values to closure percentages:
//   closure = 100 - (ear - min_ear) * (100 / max_ear)
// so the frame with the smallest EAR reads 100 (fully closed).
inline BlinkTrace normalize_trace(const std::vector<EarSample>& samples) {
  if (samples.size() < 2)
    throw DegenerateInputError("normalize_trace: need at least 2 samples");
  double min_ear = samples[0].ear;
  double max_ear = samples[0].ear;
  for (const EarSample& s : samples) {
    min_ear = std::min(min_ear, s.ear);
    max_ear = std::max(max_ear, s.ear);
  }
  if (max_ear == 0.0)
    throw DegenerateInputError("normalize_trace: flat zero trace");
  BlinkTrace trace;
  trace.min_ear = min_ear;
  trace.max_ear = max_ear;
  trace.samples.reserve(samples.size());
  for (const EarSample& s : samples)
    trace.samples.push_back(
        {s.time, s.ear, 100.0 - (s.ear - min_ear) * (100.0 / max_ear),
         s.held});
  return trace;
}

struct FrameSequence {
  std::vector<std::string> paths;
  std::vector<double> times;  // seconds, same length as paths
};

namespace detail {

inline Shape run_localizer(const GrayImage& img, const Rect& box,
                           const ErtModel& model) {
  return localize(img, box, model);
}
inline Shape run_localizer(const GrayImage& img, const Rect& box,
                           const AggregatedErtModel& model) {
  return localize_wba(img, box, model);
}

}  // namespace detail

// Detect + localize + EAR per frame. Frames with no detection carry the
// last available EAR forward (flagged); leading gaps take the first
// available value. Fails if no frame yields a face.
template <class ShapeModel>
BlinkTrace trace_sequence(const FrameSequence& frames,
                          std::span<const DetectorModel> detectors,
                          const ShapeModel& shape_model) {
  if (frames.paths.size() < 2)
    throw DegenerateInputError("trace_sequence: need at least 2 frames");
  if (frames.paths.size() != frames.times.size())
    throw ValidationError("trace_sequence: paths and times differ in length");

  std::vector<std::optional<double>> ears(frames.paths.size());
  parallel_for(frames.paths.size(), [&](std::size_t i) {
    const GrayImage image = load_image(frames.paths[i]);
    const std::vector<Detection> dets = detect(image, detectors);
    if (dets.empty()) return;
    const Shape placed =
        detail::run_localizer(image, dets.front().box, shape_model);
    ears[i] = eye_aspect_ratio(placed);
  });

  std::optional<double> first;
  for (const auto& e : ears)
    if (e) {
      first = e;
      break;
    }
  if (!first)
    throw ValidationError("trace_sequence: no face detected in any frame");

  std::vector<EarSample> samples(frames.paths.size());
  double carry = *first;
  for (std::size_t i = 0; i < ears.size(); ++i) {
    samples[i].time = frames.times[i];
    samples[i].held = !ears[i].has_value();
    if (ears[i]) carry = *ears[i];
    samples[i].ear = carry;
  }
  return normalize_trace(samples);
}

inline void write_trace_csv(const BlinkTrace& trace, std::ostream& out) {
  out << "time,ear,closure,held\n";
  for (const TraceSample& s : trace.samples)
    out << format_double(s.time) << ',' << format_double(s.ear) << ','
        << format_double(s.closure) << ',' << (s.held ? 1 : 0) << '\n';
}

}  // namespace dmt
