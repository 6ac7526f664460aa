#pragma once

// The model pool service: a content-addressed store (SHA-256 ids) behind a
// small HTTP API. Blobs live as <id>.dmtm with <id>.json metadata sidecars;
// writes go through temp files and rename, so a crash never leaves a
// half-written entry and concurrent pushes of the same bytes converge on
// one entry.
//
//   GET  /v1/models            list metadata (filters: ?kind=, ?label=)
//   GET  /v1/models/{id}       model blob (application/octet-stream)
//   GET  /v1/models/{id}/meta  metadata JSON
//   POST /v1/models            push blob; headers: X-Dmt-Kind (required),
//                              X-Dmt-Label, X-Dmt-Metrics (JSON object),
//                              X-Dmt-Sources (comma separated)

#include <httplib.h>

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/model_io.hpp"
#include "dmt/pool_meta.hpp"

namespace dmt {

class PoolService {
 public:
  explicit PoolService(std::string root_dir) : root_(std::move(root_dir)) {
    std::filesystem::create_directories(root_);
    load_existing_entries();
    install_routes();
  }

  ~PoolService() { stop(); }
  PoolService(const PoolService&) = delete;
  PoolService& operator=(const PoolService&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  void start(const std::string& host, int port) {
    if (thread_.joinable()) throw PoolError("pool service already running");
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw PoolError("pool service: cannot bind to " + host);
    } else {
      if (!server_.bind_to_port(host, port))
        throw PoolError("pool service: cannot bind to " + host + ":" +
                        std::to_string(port));
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (!thread_.joinable()) return;
    server_.stop();
    thread_.join();
  }

  int port() const { return port_; }

  std::size_t entry_count() {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.size();
  }

 private:
  std::filesystem::path blob_path(const std::string& id) const {
    return std::filesystem::path(root_) / (id + ".dmtm");
  }
  std::filesystem::path meta_path(const std::string& id) const {
    return std::filesystem::path(root_) / (id + ".json");
  }

  void load_existing_entries() {
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (entry.path().extension() != ".json") continue;
      const std::string id = entry.path().stem().string();
      if (!valid_model_id(id)) continue;
      if (!std::filesystem::exists(blob_path(id))) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(read_file(entry.path()));
        index_[id] = PoolMetadata::from_json(j);
      } catch (const std::exception&) {
        // Unparseable sidecar: leave the entry invisible rather than fail.
      }
    }
  }

  static void send_error(httplib::Response& res, int status,
                         const std::string& message) {
    nlohmann::json j;
    j["error"] = message;
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  void install_routes() {
    server_.Get("/v1/models", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      const std::string kind = req.get_param_value("kind");
      const std::string label = req.get_param_value("label");
      nlohmann::json out = nlohmann::json::array();
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& [id, meta] : index_) {
        if (!kind.empty() && meta.kind != kind) continue;
        if (!label.empty() && meta.dataset_label != label) continue;
        out.push_back(meta.to_json());
      }
      res.set_content(out.dump(2), "application/json");
    });

    server_.Get(R"(/v1/models/([0-9a-f]{64}))",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  {
                    std::lock_guard<std::mutex> lock(mu_);
                    if (!index_.contains(id)) {
                      send_error(res, 404, "unknown model id");
                      return;
                    }
                  }
                  res.set_content(read_file(blob_path(id).string()),
                                  "application/octet-stream");
                });

    server_.Get(R"(/v1/models/([0-9a-f]{64})/meta)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  std::lock_guard<std::mutex> lock(mu_);
                  const auto it = index_.find(id);
                  if (it == index_.end()) {
                    send_error(res, 404, "unknown model id");
                    return;
                  }
                  res.set_content(it->second.to_json().dump(2),
                                  "application/json");
                });

    server_.Post("/v1/models", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      handle_push(req, res);
    });
  }

  void handle_push(const httplib::Request& req, httplib::Response& res) {
    const std::string declared_kind = req.get_header_value("X-Dmt-Kind");
    if (declared_kind.empty()) {
      send_error(res, 400, "missing X-Dmt-Kind header");
      return;
    }
    const auto kind = model_kind_from_string(declared_kind);
    if (!kind) {
      send_error(res, 400, "unknown model kind '" + declared_kind + "'");
      return;
    }

    // Full-parse validation: a pool never stores bytes it cannot decode.
    PoolMetadata meta;
    try {
      const AnyModel model = deserialize_model(req.body);
      if (model.kind() != *kind) {
        send_error(res, 422, "blob kind does not match X-Dmt-Kind");
        return;
      }
      if (const auto* det = std::get_if<DetectorModel>(&model.value))
        meta.window = det->window;
      else if (const auto* ert = std::get_if<ErtModel>(&model.value))
        meta.landmark_count = int(ert->landmark_count());
      else if (const auto* agg = std::get_if<AggregatedErtModel>(&model.value))
        meta.landmark_count = int(agg->landmark_count());
    } catch (const ValidationError& e) {
      send_error(res, 422, std::string("rejected blob: ") + e.what());
      return;
    }

    meta.id = sha256_hex(req.body);
    meta.kind = declared_kind;
    meta.dataset_label = req.get_header_value("X-Dmt-Label");
    meta.created_at = utc_timestamp();
    if (req.has_header("X-Dmt-Metrics")) {
      try {
        const nlohmann::json j =
            nlohmann::json::parse(req.get_header_value("X-Dmt-Metrics"));
        if (j.contains("recall")) meta.recall = j.at("recall").get<double>();
        if (j.contains("precision"))
          meta.precision = j.at("precision").get<double>();
        if (j.contains("mean_error"))
          meta.mean_error = j.at("mean_error").get<double>();
      } catch (const std::exception&) {
        send_error(res, 400, "X-Dmt-Metrics is not valid JSON");
        return;
      }
    }
    if (req.has_header("X-Dmt-Sources")) {
      std::string raw = req.get_header_value("X-Dmt-Sources");
      std::size_t start = 0;
      while (start <= raw.size()) {
        const std::size_t comma = raw.find(',', start);
        const std::string token =
            raw.substr(start, comma == std::string::npos ? std::string::npos
                                                         : comma - start);
        if (!token.empty()) meta.sources.push_back(token);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }

    {
      std::lock_guard<std::mutex> lock(mu_);
      if (const auto it = index_.find(meta.id); it != index_.end()) {
        // Same bytes, same id: idempotent push returns the existing entry.
        nlohmann::json j;
        j["id"] = meta.id;
        res.set_content(j.dump(), "application/json");
        return;
      }
    }
    write_file_atomic(blob_path(meta.id).string(), req.body);
    write_file_atomic(meta_path(meta.id).string(), meta.to_json().dump(2));
    {
      std::lock_guard<std::mutex> lock(mu_);
      index_[meta.id] = meta;
    }
    nlohmann::json j;
    j["id"] = meta.id;
    res.status = 201;
    res.set_content(j.dump(), "application/json");
  }

  std::string root_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::mutex mu_;
  std::map<std::string, PoolMetadata> index_;
};

}  // namespace dmt
