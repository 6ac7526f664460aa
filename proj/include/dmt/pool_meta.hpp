#pragma once

// Metadata record attached to every pool entry. Serialized as JSON both on
// disk (sidecar files) and over the wire.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmt/core.hpp"

namespace dmt {

struct PoolMetadata {
  std::string id;             // SHA-256 hex of the blob
  std::string kind;           // "detector" | "ert" | "ert-aggregated"
  std::string dataset_label;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> mean_error;
  std::optional<int> window;          // detector models
  std::optional<int> landmark_count;  // landmark models
  std::string created_at;             // server-assigned, ISO 8601 UTC
  std::vector<std::string> sources;   // ids an aggregate was built from

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["id"] = id;
    j["kind"] = kind;
    j["dataset_label"] = dataset_label;
    j["created_at"] = created_at;
    nlohmann::json metrics = nlohmann::json::object();
    if (recall) metrics["recall"] = *recall;
    if (precision) metrics["precision"] = *precision;
    if (mean_error) metrics["mean_error"] = *mean_error;
    if (!metrics.empty()) j["metrics"] = metrics;
    if (window) j["window"] = *window;
    if (landmark_count) j["landmark_count"] = *landmark_count;
    if (!sources.empty()) j["sources"] = sources;
    return j;
  }

  static PoolMetadata from_json(const nlohmann::json& j) {
    PoolMetadata m;
    m.id = j.value("id", "");
    m.kind = j.value("kind", "");
    m.dataset_label = j.value("dataset_label", "");
    m.created_at = j.value("created_at", "");
    if (j.contains("metrics")) {
      const auto& metrics = j.at("metrics");
      if (metrics.contains("recall")) m.recall = metrics.at("recall").get<double>();
      if (metrics.contains("precision"))
        m.precision = metrics.at("precision").get<double>();
      if (metrics.contains("mean_error"))
        m.mean_error = metrics.at("mean_error").get<double>();
    }
    if (j.contains("window")) m.window = j.at("window").get<int>();
    if (j.contains("landmark_count"))
      m.landmark_count = j.at("landmark_count").get<int>();
    if (j.contains("sources"))
      m.sources = j.at("sources").get<std::vector<std::string>>();
    return m;
  }
};

inline bool valid_model_id(std::string_view id) {
  if (id.size() != 64) return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

}  // namespace dmt
