#pragma once

// Annotated image datasets in the imglab XML dialect: parsing with
// validation, writing, deterministic splitting into parts plus a held-out
// test set, horizontal mirroring (with landmark identity remapping for the
// 68-point scheme), and concatenation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/png_io.hpp"
#include "dmt/xml.hpp"

namespace dmt {

struct Shape {
  std::vector<Vec2> landmarks;

  std::size_t size() const { return landmarks.size(); }
  Vec2& operator[](std::size_t i) { return landmarks[i]; }
  const Vec2& operator[](std::size_t i) const { return landmarks[i]; }

  Rect bounding_box() const {
    if (landmarks.empty()) return {};
    double min_x = landmarks[0].x, max_x = landmarks[0].x;
    double min_y = landmarks[0].y, max_y = landmarks[0].y;
    for (const Vec2& p : landmarks) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

struct BoxAnnotation {
  double x = 0.0;  // left
  double y = 0.0;  // top
  double w = 0.0;
  double h = 0.0;
  bool ignore = false;
  std::vector<std::pair<std::string, Vec2>> parts;  // sorted by name

  Rect rect() const { return {x, y, w, h}; }
  bool has_parts() const { return !parts.empty(); }
  Shape shape() const {
    Shape s;
    s.landmarks.reserve(parts.size());
    for (const auto& [name, p] : parts) s.landmarks.push_back(p);
    return s;
  }
};

struct ImageAnnotation {
  std::string path;  // resolved, loadable as-is
  int width = 0;
  int height = 0;
  std::vector<BoxAnnotation> boxes;
};

struct AnnotatedDataset {
  std::vector<ImageAnnotation> images;

  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& img : images) n += img.boxes.size();
    return n;
  }
};

// ------------------------------------------------------------------ parse

namespace detail {

inline double parse_number(const std::string& text, int line) {
  double value = 0.0;
  const char* begin = text.c_str();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError("bad number '" + text + "'", line);
  return value;
}

inline double required_number(const XmlNode& node, const char* key) {
  const std::string* raw = node.attribute(key);
  if (!raw)
    throw ParseError(
        "<" + node.name + "> is missing attribute '" + key + "'", node.line);
  return parse_number(*raw, node.line);
}

inline BoxAnnotation parse_box(const XmlNode& node) {
  BoxAnnotation box;
  box.y = required_number(node, "top");
  box.x = required_number(node, "left");
  box.w = required_number(node, "width");
  box.h = required_number(node, "height");
  if (const std::string* ig = node.attribute("ignore"))
    box.ignore = (*ig == "1" || *ig == "true");
  if (box.w <= 0 || box.h <= 0)
    throw ValidationError("box with non-positive size at line " +
                          std::to_string(node.line));
  for (const XmlNode& child : node.children) {
    if (child.name != "part") {
      std::cerr << "warning: ignoring <" << child.name << "> inside <box>\n";
      continue;
    }
    const std::string* name = child.attribute("name");
    if (!name) throw ParseError("<part> is missing attribute 'name'", child.line);
    const Vec2 p{required_number(child, "x"), required_number(child, "y")};
    box.parts.emplace_back(*name, p);
  }
  std::sort(box.parts.begin(), box.parts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < box.parts.size(); ++i)
    if (box.parts[i].first == box.parts[i - 1].first)
      throw ValidationError("duplicate part name '" + box.parts[i].first +
                            "' at line " + std::to_string(node.line));
  return box;
}

}  // namespace detail

// Parses an annotation file. Image paths are resolved relative to the XML
// location; dimensions are probed from the PNG headers and every non-ignore
// box must fall inside its image. Boxes carrying parts must agree on the
// part count across the dataset.
inline AnnotatedDataset parse_annotations(const std::string& xml_path) {
  std::ifstream in(xml_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + xml_path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const XmlNode root = parse_xml(buffer.str());
  if (root.name != "dataset")
    throw ValidationError("root element of '" + xml_path +
                          "' is <" + root.name + ">, expected <dataset>");

  const std::filesystem::path base = std::filesystem::path(xml_path).parent_path();
  AnnotatedDataset ds;
  std::size_t part_count = 0;
  bool saw_parts = false;
  for (const XmlNode& section : root.children) {
    if (section.name != "images") {
      if (section.name != "name" && section.name != "comment")
        std::cerr << "warning: ignoring <" << section.name
                  << "> inside <dataset>\n";
      continue;
    }
    for (const XmlNode& image_node : section.children) {
      if (image_node.name != "image") {
        std::cerr << "warning: ignoring <" << image_node.name
                  << "> inside <images>\n";
        continue;
      }
      const std::string* file = image_node.attribute("file");
      if (!file)
        throw ParseError("<image> is missing attribute 'file'", image_node.line);
      ImageAnnotation img;
      img.path = (base / *file).lexically_normal().string();
      const auto [w, h] = image_dimensions(img.path);
      img.width = w;
      img.height = h;
      for (const XmlNode& box_node : image_node.children) {
        if (box_node.name != "box") {
          std::cerr << "warning: ignoring <" << box_node.name
                    << "> inside <image>\n";
          continue;
        }
        BoxAnnotation box = detail::parse_box(box_node);
        if (!box.ignore &&
            (box.x < 0 || box.y < 0 || box.x + box.w > img.width ||
             box.y + box.h > img.height))
          throw ValidationError("box outside image bounds in '" + img.path +
                                "' at line " + std::to_string(box_node.line));
        if (box.has_parts()) {
          if (saw_parts && box.parts.size() != part_count)
            throw ValidationError(
                "inconsistent part count in '" + img.path + "': expected " +
                std::to_string(part_count) + ", got " +
                std::to_string(box.parts.size()));
          part_count = box.parts.size();
          saw_parts = true;
        }
        img.boxes.push_back(std::move(box));
      }
      ds.images.push_back(std::move(img));
    }
  }
  return ds;
}

// ------------------------------------------------------------------ write

inline void write_annotations(const AnnotatedDataset& ds,
                              const std::string& xml_path) {
  const std::filesystem::path base =
      std::filesystem::path(xml_path).parent_path();
  std::ofstream out(xml_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + xml_path + "'");
  out << "<?xml version='1.0' encoding='UTF-8'?>\n<dataset>\n<images>\n";
  for (const ImageAnnotation& img : ds.images) {
    std::filesystem::path rel =
        std::filesystem::path(img.path).lexically_proximate(base);
    out << "  <image file='" << xml_escape(rel.string()) << "'>\n";
    for (const BoxAnnotation& box : img.boxes) {
      out << "    <box top='" << format_double(box.y) << "' left='"
          << format_double(box.x) << "' width='" << format_double(box.w)
          << "' height='" << format_double(box.h) << "'";
      if (box.ignore) out << " ignore='1'";
      if (box.parts.empty()) {
        out << "/>\n";
        continue;
      }
      out << ">\n";
      for (const auto& [name, p] : box.parts)
        out << "      <part name='" << xml_escape(name) << "' x='"
            << format_double(p.x) << "' y='" << format_double(p.y) << "'/>\n";
      out << "    </box>\n";
    }
    out << "  </image>\n";
  }
  out << "</images>\n</dataset>\n";
  if (!out) throw ValidationError("write failed for '" + xml_path + "'");
}

// ------------------------------------------------------------------ split

struct SplitResult {
  std::vector<AnnotatedDataset> parts;
  AnnotatedDataset test;
};

// Shuffles images with the seeded RNG, carves n_parts equal parts of
// floor((N - holdout) / n_parts) images each, and routes the holdout plus
// any remainder to the test set.
inline SplitResult split_dataset(const AnnotatedDataset& ds, int n_parts,
                                 int holdout, std::uint64_t seed) {
  const std::size_t n = ds.images.size();
  if (n_parts < 1) throw ValidationError("split: n_parts must be >= 1");
  if (holdout < 0 || std::size_t(holdout) > n)
    throw ValidationError("split: holdout out of range");
  const std::size_t available = n - std::size_t(holdout);
  const std::size_t part_size = available / std::size_t(n_parts);
  if (part_size == 0)
    throw ValidationError("split: not enough images for " +
                          std::to_string(n_parts) + " parts");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  SplitResult result;
  result.parts.resize(std::size_t(n_parts));
  std::size_t cursor = 0;
  for (int p = 0; p < n_parts; ++p)
    for (std::size_t k = 0; k < part_size; ++k)
      result.parts[std::size_t(p)].images.push_back(ds.images[order[cursor++]]);
  while (cursor < n) result.test.images.push_back(ds.images[order[cursor++]]);
  return result;
}

inline AnnotatedDataset concat(const std::vector<AnnotatedDataset>& sets) {
  AnnotatedDataset out;
  for (const auto& ds : sets)
    out.images.insert(out.images.end(), ds.images.begin(), ds.images.end());
  return out;
}

// ----------------------------------------------------------------- mirror

namespace detail {

// Left/right identity pairs of the 68-point scheme, 0-based.
inline const std::vector<std::pair<int, int>>& mirror68_pairs() {
  static const std::vector<std::pair<int, int>> pairs = {
      {0, 16},  {1, 15},  {2, 14},  {3, 13},  {4, 12},  {5, 11},  {6, 10},
      {7, 9},   {17, 26}, {18, 25}, {19, 24}, {20, 23}, {21, 22}, {31, 35},
      {32, 34}, {36, 45}, {37, 44}, {38, 43}, {39, 42}, {40, 47}, {41, 46},
      {48, 54}, {49, 53}, {50, 52}, {55, 59}, {56, 58}, {60, 64}, {61, 63},
      {65, 67},
  };
  return pairs;
}

inline bool is_standard_68(const std::vector<std::pair<std::string, Vec2>>& parts) {
  if (parts.size() != 68) return false;
  for (int i = 0; i < 68; ++i) {
    char name[3] = {char('0' + i / 10), char('0' + i % 10), 0};
    if (parts[std::size_t(i)].first != name) return false;
  }
  return true;
}

}  // namespace detail

// Horizontally mirrors a dataset. Boxes flip as x' = W - x - w, parts as
// x' = W - 1 - x. When the parts follow the 68-point scheme ("00".."67"),
// left/right landmark identities are swapped so that e.g. the left eye
// still labels the subject's left eye. When image_out_dir is non-empty the
// flipped PNGs are written there and the result points at them.
inline AnnotatedDataset mirror_dataset(const AnnotatedDataset& ds,
                                       const std::string& image_out_dir = {}) {
  if (!image_out_dir.empty())
    std::filesystem::create_directories(image_out_dir);
  AnnotatedDataset out;
  out.images.reserve(ds.images.size());
  for (const ImageAnnotation& img : ds.images) {
    ImageAnnotation flipped = img;
    for (BoxAnnotation& box : flipped.boxes) {
      box.x = img.width - box.x - box.w;
      for (auto& [name, p] : box.parts) p.x = img.width - 1 - p.x;
      if (detail::is_standard_68(box.parts))
        for (const auto& [a, b] : detail::mirror68_pairs())
          std::swap(box.parts[std::size_t(a)].second,
                    box.parts[std::size_t(b)].second);
    }
    if (!image_out_dir.empty()) {
      const std::filesystem::path src(img.path);
      const std::filesystem::path dst =
          std::filesystem::path(image_out_dir) /
          (src.stem().string() + "_mirror.png");
      save_image(flip_horizontal(load_image(img.path)), dst.string());
      flipped.path = dst.string();
    }
    out.images.push_back(std::move(flipped));
  }
  return out;
}

}  // namespace dmt
