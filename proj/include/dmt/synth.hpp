#pragma once

// Synthetic corpora for exercising the full pipeline without external data:
//   * detector corpus: bright squares on textured noise, with clutter;
//   * landmark corpus: warped polygon outlines with per-vertex annotations;
//   * blink sequence: a schematic face whose right eye opens and closes
//     along a scripted closure curve, annotated with 48 landmarks.
// Everything is seeded and deterministic, including the PNG bytes.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/ebc.hpp"
#include "dmt/image.hpp"
#include "dmt/png_io.hpp"

namespace dmt {

namespace detail {

// Coarse value-noise background plus fine per-pixel jitter.
inline GrayImage noise_background(int width, int height, double base,
                                  double coarse_amp, double fine_amp,
                                  Rng& rng) {
  const int step = 16;
  const int gw = width / step + 2;
  const int gh = height / step + 2;
  std::vector<double> grid(std::size_t(gw) * gh);
  for (double& v : grid) v = rng.uniform(-coarse_amp, coarse_amp);

  GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = double(y) / step;
    const int y0 = int(fy);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = double(x) / step;
      const int x0 = int(fx);
      const double wx = fx - x0;
      const double top = grid[std::size_t(y0) * gw + x0] * (1 - wx) +
                         grid[std::size_t(y0) * gw + x0 + 1] * wx;
      const double bot = grid[std::size_t(y0 + 1) * gw + x0] * (1 - wx) +
                         grid[std::size_t(y0 + 1) * gw + x0 + 1] * wx;
      const double coarse = top * (1 - wy) + bot * wy;
      const double fine = rng.uniform(-fine_amp, fine_amp);
      img.at(x, y) = float(std::clamp(base + coarse + fine, 0.0, 255.0));
    }
  }
  return img;
}

inline void fill_rect(GrayImage& img, const Rect& r, double value,
                      double jitter, Rng& rng) {
  const int x0 = std::max(0, int(r.x));
  const int y0 = std::max(0, int(r.y));
  const int x1 = std::min(img.width, int(r.right()));
  const int y1 = std::min(img.height, int(r.bottom()));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      img.at(x, y) =
          float(std::clamp(value + rng.uniform(-jitter, jitter), 0.0, 255.0));
}

inline void fill_diamond(GrayImage& img, Vec2 center, double radius,
                         double value) {
  const int x0 = std::max(0, int(center.x - radius));
  const int y0 = std::max(0, int(center.y - radius));
  const int x1 = std::min(img.width, int(center.x + radius) + 1);
  const int y1 = std::min(img.height, int(center.y + radius) + 1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (std::fabs(x - center.x) + std::fabs(y - center.y) <= radius)
        img.at(x, y) = float(std::clamp(value, 0.0, 255.0));
}

inline void add_blob(GrayImage& img, Vec2 center, double radius, double amp) {
  const int x0 = std::max(0, int(center.x - 3 * radius));
  const int y0 = std::max(0, int(center.y - 3 * radius));
  const int x1 = std::min(img.width, int(center.x + 3 * radius) + 1);
  const int y1 = std::min(img.height, int(center.y + 3 * radius) + 1);
  const double inv = 1.0 / (2.0 * radius * radius);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double d2 = (x - center.x) * (x - center.x) +
                        (y - center.y) * (y - center.y);
      const double v = img.at(x, y) + amp * std::exp(-d2 * inv);
      img.at(x, y) = float(std::clamp(v, 0.0, 255.0));
    }
}

// Stamps disks of the given radius along the segment.
inline void draw_line(GrayImage& img, Vec2 a, Vec2 b, double thickness,
                      double value) {
  const double len = distance(a, b);
  const int steps = std::max(2, int(len * 2));
  const double r = thickness / 2.0;
  for (int s = 0; s <= steps; ++s) {
    const Vec2 p = a + (b - a) * (double(s) / steps);
    const int x0 = std::max(0, int(p.x - r - 1));
    const int y0 = std::max(0, int(p.y - r - 1));
    const int x1 = std::min(img.width, int(p.x + r + 1) + 1);
    const int y1 = std::min(img.height, int(p.y + r + 1) + 1);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if ((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y) <= r * r)
          img.at(x, y) = float(std::clamp(value, 0.0, 255.0));
  }
}

// Even-odd scanline polygon fill, additive.
inline void fill_polygon(GrayImage& img, const std::vector<Vec2>& poly,
                         double add) {
  if (poly.size() < 3) return;
  double min_y = poly[0].y, max_y = poly[0].y;
  for (const Vec2& p : poly) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  std::vector<double> xs;
  for (int y = std::max(0, int(min_y)); y <= std::min(img.height - 1, int(max_y));
       ++y) {
    xs.clear();
    const double fy = y + 0.5;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % poly.size()];
      if ((a.y <= fy) == (b.y <= fy)) continue;
      xs.push_back(a.x + (fy - a.y) / (b.y - a.y) * (b.x - a.x));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, int(xs[k] + 0.5));
      const int x1 = std::min(img.width - 1, int(xs[k + 1] - 0.5));
      for (int x = x0; x <= x1; ++x)
        img.at(x, y) = float(std::clamp(double(img.at(x, y)) + add, 0.0, 255.0));
    }
  }
}

inline std::string frame_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d.png", prefix, index);
  return buf;
}

}  // namespace detail

// ------------------------------------------------------------ detector set

struct DetectorSynthParams {
  int count = 600;
  int width = 240;
  int height = 240;
  double min_size = 76.0;
  double max_size = 118.0;
  double negative_fraction = 0.1;   // images with no target
  double second_target_chance = 0.15;
  double ignore_chance = 0.05;      // mark one clutter diamond as ignore
};

// Bright, lightly textured squares on a noisy background with diamond,
// blob and line clutter. Returns the dataset; PNGs and an annotations.xml
// are written under out_dir.
inline AnnotatedDataset synth_detector_corpus(const DetectorSynthParams& params,
                                              std::uint64_t seed,
                                              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  AnnotatedDataset ds;
  for (int i = 0; i < params.count; ++i) {
    GrayImage img = detail::noise_background(params.width, params.height,
                                             rng.uniform(35, 65), 22, 7, rng);
    ImageAnnotation ann;
    ann.width = params.width;
    ann.height = params.height;

    const bool negative = rng.uniform() < params.negative_fraction;
    std::vector<Rect> targets;
    if (!negative) {
      const int n_targets = rng.uniform() < params.second_target_chance ? 2 : 1;
      for (int t = 0; t < n_targets; ++t) {
        for (int attempt = 0; attempt < 40; ++attempt) {
          const double side = rng.uniform(params.min_size, params.max_size);
          const Rect box{rng.uniform(4.0, params.width - side - 4.0),
                         rng.uniform(4.0, params.height - side - 4.0), side,
                         side};
          bool clear = true;
          for (const Rect& other : targets)
            if (intersection_area(box, other) > 0) clear = false;
          if (!clear) continue;
          targets.push_back(box);
          break;
        }
      }
    }

    // Clutter that never touches a target.
    const int n_clutter = rng.uniform_int(3, 8);
    for (int cl = 0; cl < n_clutter; ++cl) {
      const int kind = rng.uniform_int(0, 2);
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double r = rng.uniform(10, 26);
        const Vec2 c{rng.uniform(r, params.width - r),
                     rng.uniform(r, params.height - r)};
        const Rect extent{c.x - r, c.y - r, 2 * r, 2 * r};
        bool clear = true;
        for (const Rect& t : targets)
          if (intersection_area(extent, t) > 0) clear = false;
        if (!clear) continue;
        if (kind == 0) {
          detail::fill_diamond(img, c, r, rng.uniform(95, 150));
          if (rng.uniform() < params.ignore_chance) {
            BoxAnnotation ig;
            ig.x = extent.x;
            ig.y = extent.y;
            ig.w = extent.w;
            ig.h = extent.h;
            ig.ignore = true;
            ann.boxes.push_back(ig);
          }
        } else if (kind == 1) {
          detail::add_blob(img, c, r / 2.0, rng.uniform(25, 55));
        } else {
          const double angle = rng.uniform(0, 3.14159265);
          const Vec2 d{std::cos(angle) * r, std::sin(angle) * r};
          detail::draw_line(img, c - d, c + d, rng.uniform(1.0, 3.0),
                            rng.uniform(110, 160));
        }
        break;
      }
    }

    for (const Rect& t : targets) {
      detail::fill_rect(img, t, rng.uniform(195, 240), 6, rng);
      BoxAnnotation box;
      box.x = t.x;
      box.y = t.y;
      box.w = t.w;
      box.h = t.h;
      ann.boxes.push_back(box);
    }

    const std::string name = detail::frame_name("det", i);
    ann.path = (std::filesystem::path(out_dir) / name).string();
    save_image(img, ann.path);
    ds.images.push_back(std::move(ann));
  }
  write_annotations(
      ds, (std::filesystem::path(out_dir) / "annotations.xml").string());
  return ds;
}

// ------------------------------------------------------------ landmark set

struct LandmarkSynthParams {
  int count = 420;
  int width = 200;
  int height = 200;
  int landmark_count = 8;
  double warp = 1.0;  // 0 = every image carries the identical template shape
};

// Warped polygon outlines. The template polygon is deliberately asymmetric
// so each vertex has a distinct local appearance.
inline AnnotatedDataset synth_landmark_corpus(const LandmarkSynthParams& params,
                                              std::uint64_t seed,
                                              const std::string& out_dir) {
  if (params.landmark_count < 3)
    throw ValidationError("synth_landmark_corpus: need at least 3 landmarks");
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  AnnotatedDataset ds;

  const double tau = 6.283185307179586;
  static const double wobble[] = {0.22, -0.12, 0.16, 0.0, -0.2, 0.1, -0.06, 0.05};
  const int K = params.landmark_count;

  for (int i = 0; i < params.count; ++i) {
    GrayImage img = detail::noise_background(params.width, params.height,
                                             rng.uniform(40, 60), 14, 5, rng);
    const double warp = params.warp;
    const Vec2 center{params.width / 2.0 + rng.uniform(-18.0, 18.0) * warp,
                      params.height / 2.0 + rng.uniform(-18.0, 18.0) * warp};
    const double base_r = params.width * 0.18;
    const double scale = 1.0 + rng.uniform(-0.12, 0.12) * warp;
    const double rot = rng.uniform(-0.12, 0.12) * warp;

    std::vector<Vec2> verts(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      const double angle = tau * k / K - tau / 4 + rot;
      const double r =
          base_r * scale * (1.0 + wobble[k % 8]) + rng.uniform(-3.0, 3.0) * warp;
      verts[std::size_t(k)] = {center.x + r * std::cos(angle),
                               center.y + r * std::sin(angle)};
    }

    detail::fill_polygon(img, verts, 22);
    for (int k = 0; k < K; ++k)
      detail::draw_line(img, verts[std::size_t(k)],
                        verts[std::size_t((k + 1) % K)], 3.0, 205);
    for (int k = 0; k < K; ++k)
      detail::draw_line(img, verts[std::size_t(k)], verts[std::size_t(k)], 4.5,
                        235);

    Shape shape;
    shape.landmarks = verts;
    Rect box = shape.bounding_box();
    const double pad_x = box.w * 0.18;
    const double pad_y = box.h * 0.18;
    box.x -= pad_x;
    box.y -= pad_y;
    box.w += 2 * pad_x;
    box.h += 2 * pad_y;
    box.x = std::max(0.0, box.x);
    box.y = std::max(0.0, box.y);
    box.w = std::min(box.w, params.width - box.x);
    box.h = std::min(box.h, params.height - box.y);

    BoxAnnotation ann_box;
    ann_box.x = box.x;
    ann_box.y = box.y;
    ann_box.w = box.w;
    ann_box.h = box.h;
    for (int k = 0; k < K; ++k) {
      char name[8];
      std::snprintf(name, sizeof name, "%02d", k);
      ann_box.parts.emplace_back(name, verts[std::size_t(k)]);
    }
    std::sort(ann_box.parts.begin(), ann_box.parts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    ImageAnnotation ann;
    ann.width = params.width;
    ann.height = params.height;
    ann.boxes.push_back(std::move(ann_box));
    const std::string name = detail::frame_name("lmk", i);
    ann.path = (std::filesystem::path(out_dir) / name).string();
    save_image(img, ann.path);
    ds.images.push_back(std::move(ann));
  }
  write_annotations(
      ds, (std::filesystem::path(out_dir) / "annotations.xml").string());
  return ds;
}

// ------------------------------------------------------------ blink frames

struct BlinkSynthParams {
  std::vector<double> closure_script = {0, 100, 0};  // percent keyframes
  int frames = 9;         // script is interpolated across this many frames
  int width = 220;
  int height = 220;
  double fps = 30.0;
  double jitter = 0.0;    // face position jitter in pixels
};

struct BlinkSequence {
  FrameSequence frames;
  AnnotatedDataset annotations;
  std::vector<double> closures;  // scripted ground truth per frame
};

// A schematic face: bright square outline with a horizontal right eye whose
// vertical opening follows the closure script. 48 landmarks: 0..41 fixed
// context points along the face outline, 42..47 the right-eye ring used by
// the EAR computation.
inline BlinkSequence synth_blink_sequence(const BlinkSynthParams& params,
                                          std::uint64_t seed,
                                          const std::string& out_dir) {
  if (params.frames < 2)
    throw ValidationError("synth_blink_sequence: need at least 2 frames");
  if (params.closure_script.size() < 2)
    throw ValidationError("synth_blink_sequence: script needs >= 2 keyframes");
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  BlinkSequence seq;

  const double face_side = 120.0;
  const double eye_half_w = 22.0;
  const double eye_max_h = 11.0;

  for (int f = 0; f < params.frames; ++f) {
    // Piecewise-linear closure script sampled at this frame.
    const double pos = double(f) / double(params.frames - 1) *
                       double(params.closure_script.size() - 1);
    const std::size_t k0 =
        std::min(std::size_t(pos), params.closure_script.size() - 2);
    const double t = pos - double(k0);
    const double closure = params.closure_script[k0] * (1.0 - t) +
                           params.closure_script[k0 + 1] * t;
    seq.closures.push_back(closure);

    GrayImage img = detail::noise_background(params.width, params.height,
                                             rng.uniform(38, 55), 12, 5, rng);
    const Vec2 face_center{
        params.width / 2.0 + rng.uniform(-params.jitter, params.jitter),
        params.height / 2.0 + rng.uniform(-params.jitter, params.jitter)};
    const Rect face{face_center.x - face_side / 2,
                    face_center.y - face_side / 2, face_side, face_side};

    // Face outline.
    const double bright = 215;
    detail::draw_line(img, {face.x, face.y}, {face.right(), face.y}, 4, bright);
    detail::draw_line(img, {face.right(), face.y},
                      {face.right(), face.bottom()}, 4, bright);
    detail::draw_line(img, {face.right(), face.bottom()},
                      {face.x, face.bottom()}, 4, bright);
    detail::draw_line(img, {face.x, face.bottom()}, {face.x, face.y}, 4,
                      bright);
    // A mouth line for extra structure.
    detail::draw_line(img, {face_center.x - 24, face.bottom() - 26},
                      {face_center.x + 24, face.bottom() - 26}, 3, 180);
    // A left-eye dot (not tracked by the EAR landmarks).
    detail::fill_diamond(img, {face_center.x - 30, face_center.y - 18}, 5, 190);

    // Right eye: corners at +-eye_half_w, lids at +-h.
    const Vec2 eye_center{face_center.x + 26, face_center.y - 18};
    const double h = (1.0 - closure / 100.0) * eye_max_h;
    const Vec2 corner_l{eye_center.x - eye_half_w, eye_center.y};
    const Vec2 corner_r{eye_center.x + eye_half_w, eye_center.y};
    const Vec2 top_l{eye_center.x - eye_half_w / 2, eye_center.y - h};
    const Vec2 top_r{eye_center.x + eye_half_w / 2, eye_center.y - h};
    const Vec2 bot_r{eye_center.x + eye_half_w / 2, eye_center.y + h};
    const Vec2 bot_l{eye_center.x - eye_half_w / 2, eye_center.y + h};
    detail::draw_line(img, corner_l, top_l, 2.5, 232);
    detail::draw_line(img, top_l, top_r, 2.5, 232);
    detail::draw_line(img, top_r, corner_r, 2.5, 232);
    detail::draw_line(img, corner_r, bot_r, 2.5, 232);
    detail::draw_line(img, bot_r, bot_l, 2.5, 232);
    detail::draw_line(img, bot_l, corner_l, 2.5, 232);

    // Landmarks: 42 context points spread along the face outline, then the
    // eye ring in the 1-based 43..48 slots (42..47 here).
    BoxAnnotation box;
    const double pad = 12.0;
    box.x = face.x - pad;
    box.y = face.y - pad;
    box.w = face.w + 2 * pad;
    box.h = face.h + 2 * pad;
    Shape shape;
    for (int k = 0; k < 42; ++k) {
      const double along = double(k) / 42.0 * 4.0;
      const int edge = int(along);
      const double frac = along - edge;
      Vec2 p;
      switch (edge) {
        case 0: p = {face.x + frac * face.w, face.y}; break;
        case 1: p = {face.right(), face.y + frac * face.h}; break;
        case 2: p = {face.right() - frac * face.w, face.bottom()}; break;
        default: p = {face.x, face.bottom() - frac * face.h}; break;
      }
      shape.landmarks.push_back(p);
    }
    shape.landmarks.push_back(corner_l);  // 42 / LM43
    shape.landmarks.push_back(top_l);     // 43 / LM44
    shape.landmarks.push_back(top_r);     // 44 / LM45
    shape.landmarks.push_back(corner_r);  // 45 / LM46
    shape.landmarks.push_back(bot_r);     // 46 / LM47
    shape.landmarks.push_back(bot_l);     // 47 / LM48

    for (int k = 0; k < 48; ++k) {
      char name[8];
      std::snprintf(name, sizeof name, "%02d", k);
      box.parts.emplace_back(name, shape.landmarks[std::size_t(k)]);
    }

    ImageAnnotation ann;
    ann.width = params.width;
    ann.height = params.height;
    ann.boxes.push_back(std::move(box));
    const std::string name = detail::frame_name("blink", f);
    ann.path = (std::filesystem::path(out_dir) / name).string();
    save_image(img, ann.path);

    seq.frames.paths.push_back(ann.path);
    seq.frames.times.push_back(double(f) / params.fps);
    seq.annotations.images.push_back(std::move(ann));
  }
  write_annotations(seq.annotations, (std::filesystem::path(out_dir) /
                                      "annotations.xml")
                                         .string());
  // Frame manifest: path,time rows for the ear-trace CLI.
  std::ofstream manifest(std::filesystem::path(out_dir) / "manifest.csv");
  manifest << "file,time\n";
  for (std::size_t f = 0; f < seq.frames.paths.size(); ++f)
    manifest << std::filesystem::path(seq.frames.paths[f]).filename().string()
             << ',' << format_double(seq.frames.times[f]) << '\n';
  return seq;
}

}  // namespace dmt
