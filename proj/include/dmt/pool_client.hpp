#pragma once

// Client for the pool service. Every pulled blob is re-hashed locally and
// compared with the requested id before it is returned; a push likewise
// verifies that the server assigned the locally computed id.

#include <httplib.h>

#include <string>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/model_io.hpp"
#include "dmt/mwma.hpp"
#include "dmt/pool_meta.hpp"
#include "dmt/wba.hpp"

namespace dmt {

class PoolClient {
 public:
  // base_url like "http://127.0.0.1:8700".
  explicit PoolClient(const std::string& base_url)
      : base_url_(base_url), http_(base_url) {
    http_.set_connection_timeout(5, 0);
    http_.set_read_timeout(60, 0);
  }

  std::string push(const std::string& blob, const PoolMetadata& meta) {
    const std::string local_id = sha256_hex(blob);
    httplib::Headers headers{{"X-Dmt-Kind", meta.kind}};
    if (!meta.dataset_label.empty())
      headers.emplace("X-Dmt-Label", meta.dataset_label);
    nlohmann::json metrics = nlohmann::json::object();
    if (meta.recall) metrics["recall"] = *meta.recall;
    if (meta.precision) metrics["precision"] = *meta.precision;
    if (meta.mean_error) metrics["mean_error"] = *meta.mean_error;
    if (!metrics.empty()) headers.emplace("X-Dmt-Metrics", metrics.dump());
    if (!meta.sources.empty()) {
      std::string joined;
      for (const std::string& s : meta.sources) {
        if (!joined.empty()) joined.push_back(',');
        joined += s;
      }
      headers.emplace("X-Dmt-Sources", joined);
    }
    const httplib::Result res =
        http_.Post("/v1/models", headers, blob, "application/octet-stream");
    check_transport(res, "push");
    if (res->status != 200 && res->status != 201)
      throw PoolRejectedError("pool rejected push (" +
                              std::to_string(res->status) +
                              "): " + error_body(res->body));
    std::string assigned;
    try {
      assigned = nlohmann::json::parse(res->body).at("id").get<std::string>();
    } catch (const std::exception&) {
      throw PoolIntegrityError("pool push: malformed response body");
    }
    if (assigned != local_id)
      throw PoolIntegrityError(
          "pool push: server assigned id " + assigned +
          " but the blob hashes to " + local_id);
    return assigned;
  }

  std::string pull_blob(const std::string& id) {
    require_id(id);
    const httplib::Result res = http_.Get("/v1/models/" + id);
    check_transport(res, "pull");
    if (res->status == 404)
      throw PoolNotFoundError("pool: no model with id " + id);
    if (res->status != 200)
      throw PoolRejectedError("pool pull failed (" +
                              std::to_string(res->status) +
                              "): " + error_body(res->body));
    if (sha256_hex(res->body) != id)
      throw PoolIntegrityError("pool pull: blob for " + id +
                               " fails hash verification");
    return res->body;
  }

  PoolMetadata pull_meta(const std::string& id) {
    require_id(id);
    const httplib::Result res = http_.Get("/v1/models/" + id + "/meta");
    check_transport(res, "pull-meta");
    if (res->status == 404)
      throw PoolNotFoundError("pool: no model with id " + id);
    if (res->status != 200)
      throw PoolRejectedError("pool meta failed (" +
                              std::to_string(res->status) +
                              "): " + error_body(res->body));
    try {
      return PoolMetadata::from_json(nlohmann::json::parse(res->body));
    } catch (const std::exception&) {
      throw PoolIntegrityError("pool meta: malformed response body");
    }
  }

  std::vector<PoolMetadata> list(const std::string& kind = {},
                                 const std::string& label = {}) {
    httplib::Params params;
    if (!kind.empty()) params.emplace("kind", kind);
    if (!label.empty()) params.emplace("label", label);
    const httplib::Result res =
        http_.Get("/v1/models", params, httplib::Headers{});
    check_transport(res, "list");
    if (res->status != 200)
      throw PoolRejectedError("pool list failed (" +
                              std::to_string(res->status) +
                              "): " + error_body(res->body));
    try {
      std::vector<PoolMetadata> out;
      for (const auto& j : nlohmann::json::parse(res->body))
        out.push_back(PoolMetadata::from_json(j));
      return out;
    } catch (const std::exception&) {
      throw PoolIntegrityError("pool list: malformed response body");
    }
  }

  const std::string& base_url() const { return base_url_; }

 private:
  static void require_id(const std::string& id) {
    if (!valid_model_id(id))
      throw ValidationError("'" + id + "' is not a valid model id");
  }

  void check_transport(const httplib::Result& res, const char* what) {
    if (!res)
      throw PoolNetworkError(std::string("pool ") + what + ": cannot reach " +
                             base_url_ + " (" + httplib::to_string(res.error()) +
                             ")");
  }

  static std::string error_body(const std::string& body) {
    try {
      return nlohmann::json::parse(body).value("error", body);
    } catch (const std::exception&) {
      return body;
    }
  }

  std::string base_url_;
  httplib::Client http_;
};

// ------------------------------------------------------- pool aggregation

struct PoolAggregateOptions {
  std::vector<double> deviations;   // landmark models
  std::vector<int> multiplicities;  // detector models
  bool push_result = false;
  std::string result_label;
};

struct PoolAggregateResult {
  AnyModel model;
  PoolMetadata metadata;   // provenance: sources = input ids
  std::string pushed_id;   // set when push_result was requested
};

// Pulls the listed models (verifying integrity), aggregates them with the
// scheme matching their kind, and optionally pushes the result back with
// the input ids recorded as sources.
inline PoolAggregateResult aggregate_from_pool(
    PoolClient& client, const std::vector<std::string>& ids,
    const PoolAggregateOptions& opts = {}) {
  if (ids.empty())
    throw ValidationError("aggregate_from_pool: no model ids given");

  std::vector<std::string> blobs;
  blobs.reserve(ids.size());
  for (const std::string& id : ids) blobs.push_back(client.pull_blob(id));

  const ModelKind kind = peek_model_kind(blobs.front());
  for (const std::string& blob : blobs)
    if (peek_model_kind(blob) != kind)
      throw ValidationError("aggregate_from_pool: mixed model kinds");

  PoolAggregateResult result;
  result.metadata.sources = ids;
  result.metadata.dataset_label = opts.result_label;
  if (kind == ModelKind::detector) {
    std::vector<DetectorModel> models;
    models.reserve(blobs.size());
    for (const std::string& blob : blobs)
      models.push_back(deserialize_detector(blob));
    result.model = AnyModel{aggregate_mwma(models, opts.multiplicities)};
    result.metadata.kind = to_string(ModelKind::detector);
    result.metadata.window = std::get<DetectorModel>(result.model.value).window;
  } else if (kind == ModelKind::ert) {
    std::vector<ErtModel> models;
    models.reserve(blobs.size());
    for (const std::string& blob : blobs)
      models.push_back(deserialize_ert(blob));
    result.model = AnyModel{aggregate_wba(std::move(models), opts.deviations)};
    result.metadata.kind = to_string(ModelKind::ert_aggregated);
    result.metadata.landmark_count =
        int(std::get<AggregatedErtModel>(result.model.value).landmark_count());
  } else {
    throw ValidationError(
        "aggregate_from_pool: aggregated models cannot be aggregated again");
  }

  if (opts.push_result) {
    result.pushed_id =
        client.push(serialize_model(result.model), result.metadata);
    result.metadata.id = result.pushed_id;
  }
  return result;
}

}  // namespace dmt
