#include <catch_amalgamated.hpp>

#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "dmt/mwma.hpp"
#include "dmt/pool_client.hpp"
#include "dmt/pool_service.hpp"
#include "builders.hpp"
#include "util.hpp"

namespace {

struct LivePool {
  explicit LivePool(const std::string& root) : service(root) {
    service.start("127.0.0.1", 0);
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(service.port());
  }
  dmt::PoolService service;
};

}  // namespace

TEST_CASE("push assigns the content hash and pull returns the bytes",
          "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  const std::string blob =
      dmt::serialize_model(testutil::random_detector(40, 21));
  dmt::PoolMetadata meta;
  meta.kind = "detector";
  meta.dataset_label = "unit-a";
  meta.recall = 0.75;
  meta.precision = 0.5;

  const std::string id = client.push(blob, meta);
  CHECK(id == dmt::sha256_hex(blob));
  CHECK(pool.service.entry_count() == 1);

  CHECK(client.pull_blob(id) == blob);

  const dmt::PoolMetadata back = client.pull_meta(id);
  CHECK(back.id == id);
  CHECK(back.kind == "detector");
  CHECK(back.dataset_label == "unit-a");
  REQUIRE(back.recall.has_value());
  CHECK(*back.recall == 0.75);
  REQUIRE(back.precision.has_value());
  CHECK(*back.precision == 0.5);
  CHECK_FALSE(back.mean_error.has_value());
  REQUIRE(back.window.has_value());
  CHECK(*back.window == 40);  // derived from the blob by the server
  CHECK_FALSE(back.created_at.empty());

  // Pushing the same bytes again is idempotent.
  CHECK(client.push(blob, meta) == id);
  CHECK(pool.service.entry_count() == 1);
}

TEST_CASE("listing supports kind and label filters", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  dmt::PoolMetadata det_meta;
  det_meta.kind = "detector";
  det_meta.dataset_label = "part-1";
  client.push(dmt::serialize_model(testutil::random_detector(40, 1)),
              det_meta);
  det_meta.dataset_label = "part-2";
  client.push(dmt::serialize_model(testutil::random_detector(40, 2)),
              det_meta);

  dmt::PoolMetadata ert_meta;
  ert_meta.kind = "ert";
  ert_meta.dataset_label = "part-1";
  ert_meta.mean_error = 0.125;
  client.push(dmt::serialize_model(testutil::random_ert(4, 2, 6, 3)),
              ert_meta);

  CHECK(client.list().size() == 3);
  CHECK(client.list("detector").size() == 2);
  REQUIRE(client.list("ert").size() == 1);
  CHECK(client.list("ert").front().landmark_count.value_or(0) == 4);
  CHECK(client.list("", "part-1").size() == 2);
  CHECK(client.list("detector", "part-1").size() == 1);
  CHECK(client.list("detector", "nope").empty());
}

TEST_CASE("missing and malformed ids are rejected", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  const std::string absent = dmt::sha256_hex("not pushed");
  CHECK_THROWS_AS(client.pull_blob(absent), dmt::PoolNotFoundError);
  CHECK_THROWS_AS(client.pull_meta(absent), dmt::PoolNotFoundError);
  CHECK_THROWS_AS(client.pull_blob("short-id"), dmt::ValidationError);
}

TEST_CASE("tampered blobs fail integrity verification on pull", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  const std::string blob =
      dmt::serialize_model(testutil::random_detector(40, 33));
  dmt::PoolMetadata meta;
  meta.kind = "detector";
  const std::string id = client.push(blob, meta);

  // Corrupt the stored bytes behind the service's back.
  {
    std::fstream f(dir.str("pool/" + id + ".dmtm"),
                   std::ios::in | std::ios::out | std::ios::binary);
    REQUIRE(f.good());
    f.seekp(20);
    f.put(char(0x5a));
  }
  CHECK_THROWS_AS(client.pull_blob(id), dmt::PoolIntegrityError);
}

TEST_CASE("pushes that cannot be decoded are rejected", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  dmt::PoolMetadata meta;
  meta.kind = "detector";
  CHECK_THROWS_AS(client.push("not a model at all", meta),
                  dmt::PoolRejectedError);

  // Valid blob, wrong declared kind.
  meta.kind = "ert";
  CHECK_THROWS_AS(
      client.push(dmt::serialize_model(testutil::random_detector(40, 8)),
                  meta),
      dmt::PoolRejectedError);

  // Unknown kind string and missing kind header.
  meta.kind = "mystery";
  CHECK_THROWS_AS(
      client.push(dmt::serialize_model(testutil::random_detector(40, 8)),
                  meta),
      dmt::PoolRejectedError);
  httplib::Client raw(pool.url());
  const httplib::Result res =
      raw.Post("/v1/models", dmt::serialize_model(testutil::random_detector(40, 8)),
               "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 400);

  CHECK(pool.service.entry_count() == 0);
}

TEST_CASE("entries survive a service restart", "[pool]") {
  testutil::TempDir dir;
  const std::string blob =
      dmt::serialize_model(testutil::random_ert(5, 2, 10, 77));
  std::string id;
  {
    LivePool pool(dir.str("pool"));
    dmt::PoolClient client(pool.url());
    dmt::PoolMetadata meta;
    meta.kind = "ert";
    meta.dataset_label = "durable";
    id = client.push(blob, meta);
  }
  LivePool reborn(dir.str("pool"));
  CHECK(reborn.service.entry_count() == 1);
  dmt::PoolClient client(reborn.url());
  CHECK(client.pull_blob(id) == blob);
  CHECK(client.pull_meta(id).dataset_label == "durable");
}

TEST_CASE("concurrent clients push and pull without corruption", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));

  constexpr int kClients = 8;
  std::vector<std::string> blobs;
  for (int i = 0; i < kClients; ++i)
    blobs.push_back(
        dmt::serialize_model(testutil::random_detector(40, 1000 + i)));

  std::vector<std::string> ids(kClients);
  std::vector<std::string> errors(kClients);
  std::vector<std::thread> threads;
  for (int i = 0; i < kClients; ++i)
    threads.emplace_back([&, i] {
      try {
        dmt::PoolClient client(pool.url());
        dmt::PoolMetadata meta;
        meta.kind = "detector";
        ids[std::size_t(i)] = client.push(blobs[std::size_t(i)], meta);
        for (int round = 0; round < 3; ++round)
          if (client.pull_blob(ids[std::size_t(i)]) != blobs[std::size_t(i)])
            errors[std::size_t(i)] = "pulled bytes differ";
      } catch (const std::exception& e) {
        errors[std::size_t(i)] = e.what();
      }
    });
  for (std::thread& t : threads) t.join();

  for (int i = 0; i < kClients; ++i) {
    INFO("client " << i);
    CHECK(errors[std::size_t(i)].empty());
    CHECK(ids[std::size_t(i)] == dmt::sha256_hex(blobs[std::size_t(i)]));
  }
  CHECK(pool.service.entry_count() == kClients);
}

TEST_CASE("aggregate_from_pool matches local aggregation", "[pool]") {
  testutil::TempDir dir;
  LivePool pool(dir.str("pool"));
  dmt::PoolClient client(pool.url());

  SECTION("detector models use the weight-mean scheme") {
    std::vector<dmt::DetectorModel> models;
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
      models.push_back(testutil::random_detector(40, 50 + i));
      dmt::PoolMetadata meta;
      meta.kind = "detector";
      ids.push_back(client.push(dmt::serialize_model(models.back()), meta));
    }

    dmt::PoolAggregateOptions opts;
    opts.push_result = true;
    opts.result_label = "combined";
    const dmt::PoolAggregateResult result =
        dmt::aggregate_from_pool(client, ids, opts);

    CHECK(dmt::serialize_model(result.model) ==
          dmt::serialize_model(dmt::aggregate_mwma(models)));
    REQUIRE_FALSE(result.pushed_id.empty());

    const dmt::PoolMetadata meta = client.pull_meta(result.pushed_id);
    CHECK(meta.kind == "detector");
    CHECK(meta.dataset_label == "combined");
    CHECK(meta.sources == ids);
    CHECK(client.pull_blob(result.pushed_id) ==
          dmt::serialize_model(result.model));
  }

  SECTION("landmark models use the deviation-bin scheme") {
    std::vector<dmt::ErtModel> models = {testutil::random_ert(6, 2, 10, 60),
                                         testutil::random_ert(6, 3, 8, 61)};
    std::vector<std::string> ids;
    for (const dmt::ErtModel& m : models) {
      dmt::PoolMetadata meta;
      meta.kind = "ert";
      ids.push_back(client.push(dmt::serialize_model(m), meta));
    }

    dmt::PoolAggregateOptions opts;
    opts.deviations = {1.0, 2.0};
    const dmt::PoolAggregateResult result =
        dmt::aggregate_from_pool(client, ids, opts);
    CHECK(result.pushed_id.empty());
    CHECK(dmt::serialize_model(result.model) ==
          dmt::serialize_model(dmt::aggregate_wba(models, {1.0, 2.0})));
    CHECK(result.metadata.kind == "ert-aggregated");
    CHECK(result.metadata.sources == ids);
  }

  SECTION("mixed kinds and re-aggregation are rejected") {
    dmt::PoolMetadata det_meta;
    det_meta.kind = "detector";
    const std::string det_id = client.push(
        dmt::serialize_model(testutil::random_detector(40, 70)), det_meta);

    dmt::PoolMetadata ert_meta;
    ert_meta.kind = "ert";
    const std::string ert_id = client.push(
        dmt::serialize_model(testutil::random_ert(4, 2, 6, 71)), ert_meta);

    CHECK_THROWS_AS(dmt::aggregate_from_pool(client, {det_id, ert_id}),
                    dmt::ValidationError);
    CHECK_THROWS_AS(dmt::aggregate_from_pool(client, {}),
                    dmt::ValidationError);

    std::vector<dmt::ErtModel> pair = {testutil::random_ert(4, 2, 6, 72),
                                       testutil::random_ert(4, 2, 6, 73)};
    dmt::PoolMetadata agg_meta;
    agg_meta.kind = "ert-aggregated";
    const std::string agg_id = client.push(
        dmt::serialize_model(dmt::aggregate_wba(pair)), agg_meta);
    CHECK_THROWS_AS(dmt::aggregate_from_pool(client, {agg_id}),
                    dmt::ValidationError);
  }
}

TEST_CASE("unreachable pools raise network errors", "[pool]") {
  dmt::PoolClient client("http://127.0.0.1:1");
  CHECK_THROWS_AS(client.pull_blob(dmt::sha256_hex("x")),
                  dmt::PoolNetworkError);
  dmt::PoolMetadata meta;
  meta.kind = "detector";
  CHECK_THROWS_AS(
      client.push(dmt::serialize_model(testutil::random_detector(40, 1)),
                  meta),
      dmt::PoolNetworkError);
}
