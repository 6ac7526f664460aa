#pragma once

// End-to-end experiment: generate (or reuse) a synthetic corpus, split it
// into equal parts plus a held-out test set, train one model per part,
// train models on growing unions of parts, aggregate the part models, and
// report every model's test metrics as a table. With a pool URL the part
// models travel through the pool (push, pull, aggregate from pulled bytes)
// so the distributed exchange path is exercised end to end.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/detector.hpp"
#include "dmt/detector_train.hpp"
#include "dmt/ert.hpp"
#include "dmt/ert_train.hpp"
#include "dmt/model_io.hpp"
#include "dmt/mwma.hpp"
#include "dmt/pool_client.hpp"
#include "dmt/synth.hpp"
#include "dmt/wba.hpp"

namespace dmt {

struct ExperimentConfig {
  std::string kind = "detector";  // "detector" | "ert"
  int parts = 6;
  int count = 600;    // corpus size
  int holdout = 120;  // held-out test images
  std::uint64_t seed = kDefaultSeed;
  std::string work_dir;
  std::string pool_url;  // empty = aggregate locally
  std::string label = "synth";
  bool include_unions = true;
  DetectorTrainParams detector_params;
  ErtTrainParams ert_params;
};

struct ExperimentRow {
  std::string label;
  double recall = 0.0;
  double precision = 0.0;
  double mean_error = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::string csv_path;
  std::string table_path;
  std::vector<std::string> pushed_ids;  // part ids, then the aggregate id
};

namespace detail {

inline std::string union_label(int k) {
  std::string out = "P1";
  for (int i = 2; i <= k; ++i) out += "+P" + std::to_string(i);
  return out;
}

inline void write_experiment_outputs(const std::string& kind,
                                     const std::vector<ExperimentRow>& rows,
                                     ExperimentResult& result,
                                     const std::string& work_dir) {
  const bool detector = kind == "detector";
  result.csv_path =
      (std::filesystem::path(work_dir) / "results.csv").string();
  result.table_path =
      (std::filesystem::path(work_dir) / "results.txt").string();

  std::ostringstream csv;
  csv << (detector ? "label,recall,precision\n" : "label,mean_error\n");
  for (const ExperimentRow& r : rows) {
    if (detector)
      csv << r.label << ',' << format_double(r.recall) << ','
          << format_double(r.precision) << '\n';
    else
      csv << r.label << ',' << format_double(r.mean_error) << '\n';
  }
  write_file_atomic(result.csv_path, csv.str());

  std::size_t width = 5;
  for (const ExperimentRow& r : rows) width = std::max(width, r.label.size());
  std::ostringstream table;
  table << std::left << std::setw(int(width) + 2) << "model";
  if (detector)
    table << std::right << std::setw(10) << "recall" << std::setw(12)
          << "precision" << '\n';
  else
    table << std::right << std::setw(12) << "mean_error" << '\n';
  table << std::string(width + 2 + (detector ? 22 : 12), '-') << '\n';
  table << std::fixed << std::setprecision(4);
  for (const ExperimentRow& r : rows) {
    table << std::left << std::setw(int(width) + 2) << r.label;
    if (detector)
      table << std::right << std::setw(10) << r.recall << std::setw(12)
            << r.precision;
    else
      table << std::right << std::setw(12) << r.mean_error;
    table << '\n';
  }
  write_file_atomic(result.table_path, table.str());
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.kind != "detector" && config.kind != "ert")
    throw ValidationError("experiment: kind must be 'detector' or 'ert'");
  if (config.parts < 2)
    throw ValidationError("experiment: need at least 2 parts");
  if (config.work_dir.empty())
    throw ValidationError("experiment: work_dir is required");
  std::filesystem::create_directories(config.work_dir);
  const std::filesystem::path work(config.work_dir);
  const std::string corpus_dir = (work / "corpus").string();
  const std::string corpus_xml =
      (std::filesystem::path(corpus_dir) / "annotations.xml").string();

  const bool detector_kind = config.kind == "detector";

  // Corpus: reuse on disk if present (generation is deterministic anyway).
  AnnotatedDataset corpus;
  if (std::filesystem::exists(corpus_xml)) {
    corpus = parse_annotations(corpus_xml);
  } else if (detector_kind) {
    DetectorSynthParams synth;
    synth.count = config.count;
    corpus = synth_detector_corpus(synth, config.seed, corpus_dir);
  } else {
    LandmarkSynthParams synth;
    synth.count = config.count;
    corpus = synth_landmark_corpus(synth, config.seed, corpus_dir);
  }

  const SplitResult split =
      split_dataset(corpus, config.parts, config.holdout, config.seed);

  std::filesystem::create_directories(work / "models");
  ExperimentResult result;

  // ---- part models ----
  std::vector<DetectorModel> det_parts;
  std::vector<ErtModel> ert_parts;
  std::vector<PoolMetadata> part_meta(std::size_t(config.parts));
  for (int p = 0; p < config.parts; ++p) {
    ExperimentRow row;
    row.label = "P" + std::to_string(p + 1);
    PoolMetadata& meta = part_meta[std::size_t(p)];
    meta.dataset_label = config.label + "-" + row.label;
    if (detector_kind) {
      DetectorModel model =
          train_detector(split.parts[std::size_t(p)], config.detector_params);
      const EvaluationReport report = evaluate_detector(model, split.test);
      row.recall = report.recall;
      row.precision = report.precision;
      meta.kind = to_string(ModelKind::detector);
      meta.recall = report.recall;
      meta.precision = report.precision;
      save_model(model, (work / "models" / (row.label + ".dmtm")).string());
      det_parts.push_back(std::move(model));
    } else {
      ErtModel model = train_ert(split.parts[std::size_t(p)], config.ert_params);
      row.mean_error = evaluate_ert(model, split.test);
      meta.kind = to_string(ModelKind::ert);
      meta.mean_error = row.mean_error;
      save_model(model, (work / "models" / (row.label + ".dmtm")).string());
      ert_parts.push_back(std::move(model));
    }
    result.rows.push_back(row);
  }

  // ---- union models (jointly trained on growing unions, up to Pall) ----
  if (config.include_unions) {
    for (int k = 2; k <= config.parts; ++k) {
      std::vector<AnnotatedDataset> subset(split.parts.begin(),
                                           split.parts.begin() + k);
      const AnnotatedDataset joined = concat(subset);
      ExperimentRow row;
      row.label = k == config.parts ? "Pall" : detail::union_label(k);
      if (detector_kind) {
        const DetectorModel model =
            train_detector(joined, config.detector_params);
        const EvaluationReport report = evaluate_detector(model, split.test);
        row.recall = report.recall;
        row.precision = report.precision;
        if (k == config.parts)
          save_model(model, (work / "models" / "Pall.dmtm").string());
      } else {
        const ErtModel model = train_ert(joined, config.ert_params);
        row.mean_error = evaluate_ert(model, split.test);
        if (k == config.parts)
          save_model(model, (work / "models" / "Pall.dmtm").string());
      }
      result.rows.push_back(row);
    }
  }

  // ---- pool round trip (optional) ----
  if (!config.pool_url.empty()) {
    PoolClient client(config.pool_url);
    std::vector<std::string> ids;
    for (int p = 0; p < config.parts; ++p) {
      const std::string blob = detector_kind
                                   ? serialize_model(det_parts[std::size_t(p)])
                                   : serialize_model(ert_parts[std::size_t(p)]);
      ids.push_back(client.push(blob, part_meta[std::size_t(p)]));
    }
    result.pushed_ids = ids;
    // Replace the local part models with the pool's bytes so aggregation
    // consumes exactly what travelled through the service.
    if (detector_kind) {
      det_parts.clear();
      for (const std::string& id : ids)
        det_parts.push_back(deserialize_detector(client.pull_blob(id)));
    } else {
      ert_parts.clear();
      for (const std::string& id : ids)
        ert_parts.push_back(deserialize_ert(client.pull_blob(id)));
    }
  }

  // ---- aggregated models over growing prefixes ----
  AnyModel final_aggregate;
  for (int k = 2; k <= config.parts; ++k) {
    ExperimentRow row;
    row.label = k == config.parts
                    ? "COM(all)"
                    : "COM(" + detail::union_label(k) + ")";
    if (detector_kind) {
      const std::vector<DetectorModel> subset(det_parts.begin(),
                                              det_parts.begin() + k);
      DetectorModel combined = aggregate_mwma(subset);
      const EvaluationReport report = evaluate_detector(combined, split.test);
      row.recall = report.recall;
      row.precision = report.precision;
      if (k == config.parts) {
        save_model(combined, (work / "models" / "COM.dmtm").string());
        final_aggregate = AnyModel{std::move(combined)};
      }
    } else {
      std::vector<ErtModel> subset(ert_parts.begin(), ert_parts.begin() + k);
      AggregatedErtModel combined = aggregate_wba(std::move(subset));
      row.mean_error = evaluate_ert(combined, split.test);
      if (k == config.parts) {
        save_model(combined, (work / "models" / "COM.dmtm").string());
        final_aggregate = AnyModel{std::move(combined)};
      }
    }
    result.rows.push_back(row);
  }

  if (!config.pool_url.empty()) {
    PoolClient client(config.pool_url);
    PoolMetadata meta;
    meta.kind = to_string(final_aggregate.kind());
    meta.dataset_label = config.label + "-COM";
    meta.sources = result.pushed_ids;
    const ExperimentRow& com_row = result.rows.back();
    if (detector_kind) {
      meta.recall = com_row.recall;
      meta.precision = com_row.precision;
    } else {
      meta.mean_error = com_row.mean_error;
    }
    result.pushed_ids.push_back(
        client.push(serialize_model(final_aggregate), meta));
  }

  detail::write_experiment_outputs(config.kind, result.rows, result,
                                   config.work_dir);
  return result;
}

}  // namespace dmt
