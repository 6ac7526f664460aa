#pragma once

// Binary model container: magic "DMTM", format version, a kind tag
// (1 = detector, 2 = ert, 3 = ert-aggregated) and a little-endian payload.
// Serialization round-trips bit-exactly; ids are SHA-256 over the blob.

#include <openssl/evp.h>
#include <unistd.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "dmt/core.hpp"
#include "dmt/detector.hpp"
#include "dmt/ert.hpp"
#include "dmt/wba.hpp"

namespace dmt {

inline constexpr char kModelMagic[4] = {'D', 'M', 'T', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint32_t {
  detector = 1,
  ert = 2,
  ert_aggregated = 3,
};

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::detector: return "detector";
    case ModelKind::ert: return "ert";
    case ModelKind::ert_aggregated: return "ert-aggregated";
  }
  return "unknown";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  if (s == "detector") return ModelKind::detector;
  if (s == "ert") return ModelKind::ert;
  if (s == "ert-aggregated") return ModelKind::ert_aggregated;
  return std::nullopt;
}

// ------------------------------------------------------------ blob helpers

namespace detail {

class BlobWriter {
 public:
  void put_u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    buf_.append(b, 4);
  }
  void put_f64(double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((bits >> (8 * i)) & 0xff);
    buf_.append(b, 8);
  }
  void put_vec2(const Vec2& v) {
    put_f64(v.x);
    put_f64(v.y);
  }
  void put_bytes(std::string_view bytes) { buf_.append(bytes); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class BlobReader {
 public:
  explicit BlobReader(std::string_view data) : data_(data) {}

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double get_f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= std::uint64_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  Vec2 get_vec2() {
    const double x = get_f64();
    return {x, get_f64()};
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    const std::string_view out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool exhausted() const { return pos_ == data_.size(); }

  // Guards against absurd counts in corrupted blobs.
  std::uint32_t get_count(std::uint32_t max) {
    const std::uint32_t v = get_u32();
    if (v > max) throw ValidationError("model blob: implausible count");
    return v;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size())
      throw ValidationError("model blob: truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline void put_header(BlobWriter& w, ModelKind kind) {
  w.put_bytes(std::string_view(kModelMagic, 4));
  w.put_u32(kModelFormatVersion);
  w.put_u32(std::uint32_t(kind));
}

inline ModelKind get_header(BlobReader& r) {
  const std::string_view magic = r.get_bytes(4);
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0)
    throw ValidationError("model blob: bad magic, not a model file");
  const std::uint32_t version = r.get_u32();
  if (version != kModelFormatVersion)
    throw ValidationError("model blob: unsupported format version " +
                          std::to_string(version));
  const std::uint32_t kind = r.get_u32();
  if (kind < 1 || kind > 3)
    throw ValidationError("model blob: unknown model kind " +
                          std::to_string(kind));
  return ModelKind(kind);
}

}  // namespace detail

// ------------------------------------------------------------- serializers

inline std::string serialize_model(const DetectorModel& m) {
  detail::BlobWriter w;
  detail::put_header(w, ModelKind::detector);
  w.put_u32(std::uint32_t(m.window));
  w.put_u32(std::uint32_t(m.extractor.cell_size));
  w.put_u32(std::uint32_t(m.extractor.orientation_bins));
  w.put_f64(m.bias);
  w.put_f64(m.detection_threshold);
  w.put_u32(std::uint32_t(m.weights.size()));
  for (double v : m.weights) w.put_f64(v);
  return w.take();
}

inline std::string serialize_model(const ErtModel& m) {
  detail::BlobWriter w;
  detail::put_header(w, ModelKind::ert);
  w.put_u32(std::uint32_t(m.landmark_count()));
  for (const Vec2& p : m.init_shape.landmarks) w.put_vec2(p);
  w.put_u32(std::uint32_t(m.cascades.size()));
  for (const CascadeLevel& level : m.cascades) {
    w.put_u32(std::uint32_t(level.anchors.size()));
    for (const FeatureAnchor& a : level.anchors) {
      w.put_u32(a.landmark);
      w.put_vec2(a.offset);
    }
    w.put_u32(std::uint32_t(level.forest.size()));
    for (const RegressionTree& tree : level.forest) {
      w.put_u32(std::uint32_t(tree.splits.size()));
      for (const SplitNode& s : tree.splits) {
        w.put_u32(s.feature_a);
        w.put_u32(s.feature_b);
        w.put_f64(s.threshold);
      }
      w.put_u32(std::uint32_t(tree.leaves.size()));
      for (const auto& leaf : tree.leaves)
        for (const Vec2& d : leaf) w.put_vec2(d);
    }
  }
  return w.take();
}

inline std::string serialize_model(const AggregatedErtModel& m) {
  detail::BlobWriter w;
  detail::put_header(w, ModelKind::ert_aggregated);
  w.put_u32(std::uint32_t(m.landmark_count()));
  for (const Vec2& p : m.init_shape.landmarks) w.put_vec2(p);
  w.put_u32(std::uint32_t(m.subdivisions.size()));
  for (std::size_t k = 0; k < m.subdivisions.size(); ++k) {
    w.put_f64(m.deviations[k]);
    const std::string sub = serialize_model(m.subdivisions[k]);
    w.put_u32(std::uint32_t(sub.size()));
    w.put_bytes(sub);
  }
  return w.take();
}

// ----------------------------------------------------------- deserializers

inline ModelKind peek_model_kind(std::string_view blob) {
  detail::BlobReader r(blob);
  return detail::get_header(r);
}

namespace detail {

inline DetectorModel read_detector(BlobReader& r) {
  DetectorModel m;
  m.window = int(r.get_count(1 << 16));
  m.extractor.cell_size = int(r.get_count(1 << 16));
  m.extractor.orientation_bins = int(r.get_count(1 << 16));
  if (m.window < 1 || m.extractor.cell_size < 1 ||
      m.extractor.orientation_bins < 1)
    throw ValidationError("model blob: bad detector geometry");
  m.bias = r.get_f64();
  m.detection_threshold = r.get_f64();
  const std::uint32_t n = r.get_count(1u << 28);
  if (n != m.weight_count())
    throw ValidationError("model blob: weight count does not match window");
  m.weights.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) m.weights[i] = r.get_f64();
  return m;
}

inline ErtModel read_ert(BlobReader& r) {
  ErtModel m;
  const std::uint32_t landmarks = r.get_count(1 << 20);
  if (landmarks == 0) throw ValidationError("model blob: no landmarks");
  m.init_shape.landmarks.resize(landmarks);
  for (auto& p : m.init_shape.landmarks) p = r.get_vec2();
  const std::uint32_t n_levels = r.get_count(1 << 16);
  m.cascades.resize(n_levels);
  for (CascadeLevel& level : m.cascades) {
    const std::uint32_t n_anchors = r.get_count(1 << 24);
    level.anchors.resize(n_anchors);
    for (FeatureAnchor& a : level.anchors) {
      a.landmark = r.get_u32();
      if (a.landmark >= landmarks)
        throw ValidationError("model blob: anchor references a bad landmark");
      a.offset = r.get_vec2();
    }
    const std::uint32_t n_trees = r.get_count(1 << 24);
    level.forest.resize(n_trees);
    for (RegressionTree& tree : level.forest) {
      const std::uint32_t n_splits = r.get_count(1 << 20);
      tree.splits.resize(n_splits);
      for (SplitNode& s : tree.splits) {
        s.feature_a = r.get_u32();
        s.feature_b = r.get_u32();
        if (s.feature_a >= n_anchors || s.feature_b >= n_anchors)
          throw ValidationError("model blob: split references a bad feature");
        s.threshold = r.get_f64();
      }
      const std::uint32_t n_leaves = r.get_count(1 << 20);
      if (n_leaves != n_splits + 1)
        throw ValidationError("model blob: tree is not a complete tree");
      tree.leaves.assign(n_leaves, std::vector<Vec2>(landmarks));
      for (auto& leaf : tree.leaves)
        for (Vec2& d : leaf) d = r.get_vec2();
    }
  }
  return m;
}

}  // namespace detail

inline DetectorModel deserialize_detector(std::string_view blob) {
  detail::BlobReader r(blob);
  if (detail::get_header(r) != ModelKind::detector)
    throw ValidationError("model blob: expected a detector model");
  DetectorModel m = detail::read_detector(r);
  if (!r.exhausted()) throw ValidationError("model blob: trailing bytes");
  return m;
}

inline ErtModel deserialize_ert(std::string_view blob) {
  detail::BlobReader r(blob);
  if (detail::get_header(r) != ModelKind::ert)
    throw ValidationError("model blob: expected an ert model");
  ErtModel m = detail::read_ert(r);
  if (!r.exhausted()) throw ValidationError("model blob: trailing bytes");
  return m;
}

inline AggregatedErtModel deserialize_aggregated(std::string_view blob) {
  detail::BlobReader r(blob);
  if (detail::get_header(r) != ModelKind::ert_aggregated)
    throw ValidationError("model blob: expected an aggregated ert model");
  AggregatedErtModel m;
  const std::uint32_t landmarks = r.get_count(1 << 20);
  if (landmarks == 0) throw ValidationError("model blob: no landmarks");
  m.init_shape.landmarks.resize(landmarks);
  for (auto& p : m.init_shape.landmarks) p = r.get_vec2();
  const std::uint32_t n_subs = r.get_count(1 << 16);
  if (n_subs == 0) throw ValidationError("model blob: no subdivisions");
  m.subdivisions.reserve(n_subs);
  m.deviations.reserve(n_subs);
  for (std::uint32_t k = 0; k < n_subs; ++k) {
    const double dev = r.get_f64();
    if (!(dev > 0.0))
      throw ValidationError("model blob: non-positive deviation");
    const std::uint32_t len = r.get_count(1u << 30);
    m.subdivisions.push_back(deserialize_ert(r.get_bytes(len)));
    m.deviations.push_back(dev);
    if (m.subdivisions.back().landmark_count() != landmarks)
      throw ValidationError("model blob: subdivision landmark mismatch");
  }
  if (!r.exhausted()) throw ValidationError("model blob: trailing bytes");
  m.total_deviation = 0.0;
  for (double d : m.deviations) m.total_deviation += d;
  return m;
}

// ---------------------------------------------------------------- any kind

struct AnyModel {
  std::variant<DetectorModel, ErtModel, AggregatedErtModel> value;

  ModelKind kind() const {
    switch (value.index()) {
      case 0: return ModelKind::detector;
      case 1: return ModelKind::ert;
      default: return ModelKind::ert_aggregated;
    }
  }
};

inline AnyModel deserialize_model(std::string_view blob) {
  switch (peek_model_kind(blob)) {
    case ModelKind::detector: return {deserialize_detector(blob)};
    case ModelKind::ert: return {deserialize_ert(blob)};
    case ModelKind::ert_aggregated: return {deserialize_aggregated(blob)};
  }
  throw ValidationError("model blob: unknown kind");
}

inline std::string serialize_model(const AnyModel& m) {
  return std::visit([](const auto& v) { return serialize_model(v); }, m.value);
}

// -------------------------------------------------------------------- files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string data;
  in.seekg(0, std::ios::end);
  data.resize(std::size_t(in.tellg()));
  in.seekg(0);
  in.read(data.data(), std::streamsize(data.size()));
  if (!in) throw ValidationError("cannot read '" + path + "'");
  return data;
}

// Write to a sibling temp file, then rename: readers never observe a
// partially written file.
inline void write_file_atomic(const std::string& path,
                              std::string_view contents) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), std::streamsize(contents.size()));
    out.flush();
    if (!out) throw ValidationError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

template <class Model>
void save_model(const Model& m, const std::string& path) {
  write_file_atomic(path, serialize_model(m));
}

inline AnyModel load_model(const std::string& path) {
  return deserialize_model(read_file(path));
}

// ------------------------------------------------------------------ sha256

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  return to_hex(digest, len);
}

}  // namespace dmt
