// dmt: command-line front end for the distributed model training toolkit.
// Train sliding-window detectors and landmark localizers on dataset parts,
// aggregate part models without sharing images, exchange models through a
// pool service, and run end-to-end experiments on synthetic corpora.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "dmt/core.hpp"
#include "dmt/datasets.hpp"
#include "dmt/detector.hpp"
#include "dmt/detector_train.hpp"
#include "dmt/ebc.hpp"
#include "dmt/ert.hpp"
#include "dmt/ert_train.hpp"
#include "dmt/experiment.hpp"
#include "dmt/model_io.hpp"
#include "dmt/mwma.hpp"
#include "dmt/pool_client.hpp"
#include "dmt/pool_service.hpp"
#include "dmt/synth.hpp"
#include "dmt/wba.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPool = 3;

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    out.push_back(dmt::detail::parse_number(token, 0));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_double_list(csv)) out.push_back(int(v));
  return out;
}

dmt::Rect parse_box_arg(const std::string& csv) {
  const std::vector<double> v = parse_double_list(csv);
  if (v.size() != 4)
    throw dmt::ValidationError("--box expects 'x,y,w,h', got '" + csv + "'");
  return {v[0], v[1], v[2], v[3]};
}

std::string normalize_pool_url(std::string url) {
  if (url.find("://") == std::string::npos) url = "http://" + url;
  return url;
}

std::vector<dmt::DetectorModel> load_detectors(
    const std::vector<std::string>& paths) {
  std::vector<dmt::DetectorModel> models;
  models.reserve(paths.size());
  for (const std::string& p : paths)
    models.push_back(dmt::deserialize_detector(dmt::read_file(p)));
  return models;
}

void print_detections(const std::vector<dmt::Detection>& dets,
                      std::ostream& out) {
  out << "x,y,w,h,score,model\n";
  for (const dmt::Detection& d : dets)
    out << dmt::format_double(d.box.x) << ',' << dmt::format_double(d.box.y)
        << ',' << dmt::format_double(d.box.w) << ','
        << dmt::format_double(d.box.h) << ',' << dmt::format_double(d.score)
        << ',' << d.model_index << '\n';
}

void print_shape(const dmt::Shape& shape, std::ostream& out) {
  out << "landmark,x,y\n";
  for (std::size_t i = 0; i < shape.size(); ++i)
    out << i << ',' << dmt::format_double(shape[i].x) << ','
        << dmt::format_double(shape[i].y) << '\n';
}

dmt::FrameSequence read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in)
    throw dmt::ValidationError("cannot open manifest '" + manifest_path + "'");
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  dmt::FrameSequence frames;
  std::string line;
  bool first = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line.rfind("file,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    const std::size_t comma = line.rfind(',');
    if (comma == std::string::npos)
      throw dmt::ParseError("manifest line needs 'file,time'", line_no);
    frames.paths.push_back((base / line.substr(0, comma)).string());
    frames.times.push_back(
        dmt::detail::parse_number(line.substr(comma + 1), line_no));
  }
  return frames;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dmt: trains HOG sliding-window detectors and regression-tree landmark "
      "localizers on partitioned datasets, aggregates the part models, and "
      "exchanges models through a content-addressed pool service."};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read default option values from an INI file");

  // ------------------------------------------------------- train-detector
  auto* train_det = app.add_subcommand(
      "train-detector", "Train a sliding-window detector on an annotated set");
  struct {
    std::string data, out, mirror_dir;
    dmt::DetectorTrainParams params;
    bool add_mirrored = false;
  } td;
  train_det->add_option("--data", td.data, "Annotation XML")->required();
  train_det->add_option("--out,-o", td.out, "Output model file")->required();
  train_det->add_option("--c", td.params.c, "Hinge-loss trade-off");
  train_det->add_option("--epsilon", td.params.epsilon,
                        "Relative convergence tolerance");
  train_det->add_option("--target-size", td.params.target_size,
                        "Detection window edge, pixels");
  train_det->add_option("--upsample", td.params.upsample,
                        "Input upscaling steps");
  train_det->add_option("--seed", td.params.seed, "RNG seed");
  train_det->add_option("--max-epochs", td.params.max_epochs,
                        "Optimizer epoch cap");
  train_det->add_option("--mining-rounds", td.params.mining_rounds,
                        "Hard-negative mining rounds");
  train_det->add_flag("--add-mirrored", td.add_mirrored,
                      "Also train on the horizontally mirrored dataset");
  train_det->callback([&td] {
    dmt::AnnotatedDataset ds = dmt::parse_annotations(td.data);
    if (td.add_mirrored) {
      const std::string dir =
          td.mirror_dir.empty()
              ? (std::filesystem::path(td.out).parent_path() / "mirrored")
                    .string()
              : td.mirror_dir;
      ds = dmt::concat({ds, dmt::mirror_dataset(ds, dir)});
    }
    dmt::DetectorTrainLog log;
    const dmt::DetectorModel model = dmt::train_detector(ds, td.params, &log);
    dmt::save_model(model, td.out);
    std::cout << "trained on " << log.positive_count << " positives / "
              << log.negative_count << " negatives";
    if (log.skipped_boxes > 0)
      std::cout << " (" << log.skipped_boxes << " boxes skipped)";
    std::cout << "\nfinal objective "
              << dmt::format_double(log.objective.back().back()) << "\nwrote "
              << td.out << '\n';
  });

  // ---------------------------------------------------------- train-shape
  auto* train_shape = app.add_subcommand(
      "train-shape", "Train a regression-tree landmark localizer");
  struct {
    std::string data, out;
    dmt::ErtTrainParams params;
  } ts;
  train_shape->add_option("--data", ts.data, "Annotation XML")->required();
  train_shape->add_option("--out,-o", ts.out, "Output model file")->required();
  train_shape->add_option("--cascades", ts.params.cascades, "Cascade levels");
  train_shape->add_option("--trees", ts.params.trees_per_cascade,
                          "Trees per cascade level");
  train_shape->add_option("--depth", ts.params.tree_depth, "Tree depth");
  train_shape->add_option("--nu", ts.params.nu, "Leaf shrinkage");
  train_shape->add_option("--oversampling", ts.params.oversampling,
                          "Start shapes per training shape");
  train_shape->add_option("--pool-size", ts.params.feature_pool_size,
                          "Pixel pool size per cascade level");
  train_shape->add_option("--test-splits", ts.params.test_splits,
                          "Split candidates per node");
  train_shape->add_option("--lambda", ts.params.lambda,
                          "Locality prior strength");
  train_shape->add_option("--seed", ts.params.seed, "RNG seed");
  train_shape->callback([&ts] {
    const dmt::AnnotatedDataset ds = dmt::parse_annotations(ts.data);
    dmt::ErtTrainLog log;
    const dmt::ErtModel model = dmt::train_ert(ds, ts.params, &log);
    dmt::save_model(model, ts.out);
    std::cout << "trained on " << log.sample_count
              << " oversampled shapes\nper-level mean squared residual:";
    for (double v : log.level_mse) std::cout << ' ' << dmt::format_double(v);
    std::cout << "\nwrote " << ts.out << '\n';
  });

  // ------------------------------------------------------- aggregate-mwma
  auto* agg_mwma = app.add_subcommand(
      "aggregate-mwma", "Mean-aggregate detector models (weight matrices)");
  struct {
    std::vector<std::string> models;
    std::string out, multiplicities;
  } am;
  agg_mwma->add_option("models", am.models, "Part model files")
      ->required()
      ->expected(-1);
  agg_mwma->add_option("--out,-o", am.out, "Output model file")->required();
  agg_mwma->add_option("--multiplicities", am.multiplicities,
                       "Comma-separated integer weights, one per model");
  agg_mwma->callback([&am] {
    const std::vector<dmt::DetectorModel> models = load_detectors(am.models);
    const std::vector<int> mult = am.multiplicities.empty()
                                      ? std::vector<int>{}
                                      : parse_int_list(am.multiplicities);
    dmt::save_model(dmt::aggregate_mwma(models, mult), am.out);
    std::cout << "aggregated " << models.size() << " detectors -> " << am.out
              << '\n';
  });

  // -------------------------------------------------------- aggregate-wba
  auto* agg_wba = app.add_subcommand(
      "aggregate-wba", "Bin-aggregate landmark models (weighted subdivisions)");
  struct {
    std::vector<std::string> models;
    std::string out, deviations;
  } aw;
  agg_wba->add_option("models", aw.models, "Part model files")
      ->required()
      ->expected(-1);
  agg_wba->add_option("--out,-o", aw.out, "Output model file")->required();
  agg_wba->add_option("--deviations", aw.deviations,
                      "Comma-separated weights, one per model");
  agg_wba->callback([&aw] {
    std::vector<dmt::ErtModel> models;
    models.reserve(aw.models.size());
    for (const std::string& p : aw.models)
      models.push_back(dmt::deserialize_ert(dmt::read_file(p)));
    const std::vector<double> devs = aw.deviations.empty()
                                         ? std::vector<double>{}
                                         : parse_double_list(aw.deviations);
    dmt::save_model(dmt::aggregate_wba(std::move(models), devs), aw.out);
    std::cout << "aggregated " << aw.models.size() << " landmark models -> "
              << aw.out << '\n';
  });

  // ---------------------------------------------------------------- detect
  auto* detect_cmd =
      app.add_subcommand("detect", "Run detectors on one image");
  struct {
    std::vector<std::string> models;
    std::string image;
    std::optional<double> threshold;
  } dc;
  detect_cmd->add_option("--model,-m", dc.models, "Detector model file(s)")
      ->required();
  detect_cmd->add_option("--image", dc.image, "Input PNG")->required();
  detect_cmd->add_option("--threshold", dc.threshold,
                         "Override the stored detection threshold");
  detect_cmd->callback([&dc] {
    std::vector<dmt::DetectorModel> models = load_detectors(dc.models);
    if (dc.threshold)
      for (dmt::DetectorModel& m : models) m.detection_threshold = *dc.threshold;
    print_detections(dmt::detect(dmt::load_image(dc.image), models), std::cout);
  });

  // -------------------------------------------------------------- localize
  auto* localize_cmd = app.add_subcommand(
      "localize", "Place landmarks on one image (via detector or --box)");
  struct {
    std::vector<std::string> detectors;
    std::string shape_model, image, box;
  } lc;
  localize_cmd->add_option("--shape-model,-s", lc.shape_model,
                           "Landmark model file")
      ->required();
  localize_cmd->add_option("--image", lc.image, "Input PNG")->required();
  localize_cmd->add_option("--detector,-m", lc.detectors,
                           "Detector model file(s) to find the face box");
  localize_cmd->add_option("--box", lc.box,
                           "Use this face box 'x,y,w,h' instead of detecting");
  localize_cmd->callback([&lc] {
    const dmt::GrayImage image = dmt::load_image(lc.image);
    dmt::Rect box;
    if (!lc.box.empty()) {
      box = parse_box_arg(lc.box);
    } else {
      if (lc.detectors.empty())
        throw dmt::ValidationError("localize: give --detector or --box");
      const auto dets =
          dmt::detect(image, load_detectors(lc.detectors));
      if (dets.empty()) {
        std::cerr << "no detections\n";
        throw dmt::ValidationError("localize: no face found in the image");
      }
      box = dets.front().box;
    }
    const dmt::AnyModel any = dmt::load_model(lc.shape_model);
    dmt::Shape shape;
    if (const auto* ert = std::get_if<dmt::ErtModel>(&any.value))
      shape = dmt::localize(image, box, *ert);
    else if (const auto* agg = std::get_if<dmt::AggregatedErtModel>(&any.value))
      shape = dmt::localize_wba(image, box, *agg);
    else
      throw dmt::ValidationError("localize: not a landmark model");
    print_shape(shape, std::cout);
  });

  // -------------------------------------------------------------- ear-trace
  auto* ear_cmd = app.add_subcommand(
      "ear-trace", "Detect, localize and trace eye closure over frames");
  struct {
    std::vector<std::string> detectors;
    std::string shape_model, manifest, out;
  } ec;
  ear_cmd->add_option("--detector,-m", ec.detectors, "Detector model file(s)")
      ->required();
  ear_cmd->add_option("--shape-model,-s", ec.shape_model, "Landmark model")
      ->required();
  ear_cmd
      ->add_option("--manifest", ec.manifest,
                   "CSV of 'file,time' rows; paths relative to the manifest")
      ->required();
  ear_cmd->add_option("--out,-o", ec.out, "Output CSV (default: stdout)");
  ear_cmd->callback([&ec] {
    const dmt::FrameSequence frames = read_manifest(ec.manifest);
    const std::vector<dmt::DetectorModel> detectors =
        load_detectors(ec.detectors);
    const dmt::AnyModel any = dmt::load_model(ec.shape_model);
    dmt::BlinkTrace trace;
    if (const auto* ert = std::get_if<dmt::ErtModel>(&any.value))
      trace = dmt::trace_sequence(frames, detectors, *ert);
    else if (const auto* agg = std::get_if<dmt::AggregatedErtModel>(&any.value))
      trace = dmt::trace_sequence(frames, detectors, *agg);
    else
      throw dmt::ValidationError("ear-trace: not a landmark model");
    if (ec.out.empty()) {
      dmt::write_trace_csv(trace, std::cout);
    } else {
      std::ostringstream buf;
      dmt::write_trace_csv(trace, buf);
      dmt::write_file_atomic(ec.out, buf.str());
      std::cout << "wrote " << ec.out << '\n';
    }
  });

  // -------------------------------------------------------------- evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Score models against an annotated dataset");
  struct {
    std::vector<std::string> models;
    std::string data;
  } ev;
  eval_cmd->add_option("--model,-m", ev.models, "Model file(s)")->required();
  eval_cmd->add_option("--data", ev.data, "Annotation XML")->required();
  eval_cmd->callback([&ev] {
    const dmt::AnnotatedDataset ds = dmt::parse_annotations(ev.data);
    const dmt::ModelKind kind =
        dmt::peek_model_kind(dmt::read_file(ev.models.front()));
    if (kind == dmt::ModelKind::detector) {
      const auto models = load_detectors(ev.models);
      const dmt::EvaluationReport r = dmt::evaluate_detector(models, ds);
      std::cout << "recall=" << dmt::format_double(r.recall)
                << (r.recall_undefined ? " (undefined)" : "")
                << " precision=" << dmt::format_double(r.precision)
                << (r.precision_undefined ? " (undefined)" : "")
                << " tp=" << r.true_positives << " fp=" << r.false_positives
                << " fn=" << r.false_negatives << '\n';
      return;
    }
    if (ev.models.size() != 1)
      throw dmt::ValidationError(
          "evaluate: landmark evaluation takes a single model");
    const dmt::AnyModel any = dmt::load_model(ev.models.front());
    double err = 0.0;
    if (const auto* ert = std::get_if<dmt::ErtModel>(&any.value))
      err = dmt::evaluate_ert(*ert, ds);
    else
      err = dmt::evaluate_ert(std::get<dmt::AggregatedErtModel>(any.value), ds);
    std::cout << "mean_error=" << dmt::format_double(err) << '\n';
  });

  // --------------------------------------------------------- dataset-split
  auto* split_cmd = app.add_subcommand(
      "dataset-split", "Shuffle and split a dataset into parts + test set");
  struct {
    std::string data, out_dir;
    int parts = 6;
    int holdout = 0;
    std::uint64_t seed = dmt::kDefaultSeed;
  } sp;
  split_cmd->add_option("--data", sp.data, "Annotation XML")->required();
  split_cmd->add_option("--out-dir", sp.out_dir, "Output directory")
      ->required();
  split_cmd->add_option("--parts", sp.parts, "Number of equal parts");
  split_cmd->add_option("--holdout", sp.holdout, "Held-out test images");
  split_cmd->add_option("--seed", sp.seed, "Shuffle seed");
  split_cmd->callback([&sp] {
    const dmt::AnnotatedDataset ds = dmt::parse_annotations(sp.data);
    const dmt::SplitResult split =
        dmt::split_dataset(ds, sp.parts, sp.holdout, sp.seed);
    std::filesystem::create_directories(sp.out_dir);
    for (std::size_t p = 0; p < split.parts.size(); ++p) {
      char name[32];
      std::snprintf(name, sizeof name, "part_%02zu.xml", p + 1);
      dmt::write_annotations(
          split.parts[p], (std::filesystem::path(sp.out_dir) / name).string());
      std::cout << name << ": " << split.parts[p].images.size() << " images\n";
    }
    dmt::write_annotations(
        split.test, (std::filesystem::path(sp.out_dir) / "test.xml").string());
    std::cout << "test.xml: " << split.test.images.size() << " images\n";
  });

  // ------------------------------------------------------------- synth-gen
  auto* synth_cmd = app.add_subcommand(
      "synth-gen", "Generate a synthetic annotated corpus");
  struct {
    std::string kind = "detector";
    std::string out_dir, script = "0,100,0";
    int count = 0;
    int frames = 9;
    int landmarks = 8;
    double warp = 1.0;
    double jitter = 0.0;
    std::uint64_t seed = dmt::kDefaultSeed;
  } sg;
  synth_cmd
      ->add_option("--kind", sg.kind, "detector | landmarks | blink")
      ->check(CLI::IsMember({"detector", "landmarks", "blink"}));
  synth_cmd->add_option("--out-dir", sg.out_dir, "Output directory")
      ->required();
  synth_cmd->add_option("--count", sg.count,
                        "Image count (default: per-kind default)");
  synth_cmd->add_option("--seed", sg.seed, "RNG seed");
  synth_cmd->add_option("--frames", sg.frames, "Blink: frame count");
  synth_cmd->add_option("--script", sg.script,
                        "Blink: closure keyframes, e.g. '0,100,0'");
  synth_cmd->add_option("--jitter", sg.jitter, "Blink: face jitter, pixels");
  synth_cmd->add_option("--landmarks", sg.landmarks,
                        "Landmarks: vertex count");
  synth_cmd->add_option("--warp", sg.warp,
                        "Landmarks: deformation strength (0 = identical)");
  synth_cmd->callback([&sg] {
    if (sg.kind == "detector") {
      dmt::DetectorSynthParams params;
      if (sg.count > 0) params.count = sg.count;
      const auto ds = dmt::synth_detector_corpus(params, sg.seed, sg.out_dir);
      std::cout << "wrote " << ds.images.size() << " images + annotations.xml to "
                << sg.out_dir << '\n';
    } else if (sg.kind == "landmarks") {
      dmt::LandmarkSynthParams params;
      if (sg.count > 0) params.count = sg.count;
      params.landmark_count = sg.landmarks;
      params.warp = sg.warp;
      const auto ds = dmt::synth_landmark_corpus(params, sg.seed, sg.out_dir);
      std::cout << "wrote " << ds.images.size() << " images + annotations.xml to "
                << sg.out_dir << '\n';
    } else {
      dmt::BlinkSynthParams params;
      params.frames = sg.frames;
      params.closure_script = parse_double_list(sg.script);
      params.jitter = sg.jitter;
      const auto seq = dmt::synth_blink_sequence(params, sg.seed, sg.out_dir);
      std::cout << "wrote " << seq.frames.paths.size()
                << " frames + annotations.xml + manifest.csv to " << sg.out_dir
                << '\n';
    }
  });

  // ------------------------------------------------------------- pool-serve
  auto* serve_cmd =
      app.add_subcommand("pool-serve", "Run the model pool service");
  struct {
    std::string root, bind = "127.0.0.1:8700";
  } pserve;
  serve_cmd->add_option("--root", pserve.root, "Storage directory")->required();
  serve_cmd->add_option("--bind", pserve.bind, "host:port to listen on")
      ->envname("DMT_POOL_ADDR");
  serve_cmd->callback([&pserve] {
    std::string host = pserve.bind;
    int port = 8700;
    if (const std::size_t colon = host.rfind(':'); colon != std::string::npos) {
      port = std::stoi(host.substr(colon + 1));
      host = host.substr(0, colon);
    }
    dmt::PoolService service(pserve.root);
    service.start(host, port);
    std::cout << "pool serving on " << host << ':' << service.port() << " ("
              << service.entry_count() << " entries)" << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  });

  // -------------------------------------------------------------- pool-push
  auto* push_cmd =
      app.add_subcommand("pool-push", "Push a model file to the pool");
  struct {
    std::string pool, model, label;
    std::optional<double> recall, precision, mean_error;
  } pp;
  push_cmd->add_option("--pool", pp.pool, "Pool URL (host:port)")
      ->required()
      ->envname("DMT_POOL_ADDR");
  push_cmd->add_option("--model,-m", pp.model, "Model file")->required();
  push_cmd->add_option("--label", pp.label, "Dataset label");
  push_cmd->add_option("--recall", pp.recall, "Metric: recall");
  push_cmd->add_option("--precision", pp.precision, "Metric: precision");
  push_cmd->add_option("--mean-error", pp.mean_error, "Metric: mean error");
  push_cmd->callback([&pp] {
    const std::string blob = dmt::read_file(pp.model);
    dmt::PoolMetadata meta;
    meta.kind = dmt::to_string(dmt::peek_model_kind(blob));
    meta.dataset_label = pp.label;
    meta.recall = pp.recall;
    meta.precision = pp.precision;
    meta.mean_error = pp.mean_error;
    dmt::PoolClient client(normalize_pool_url(pp.pool));
    std::cout << client.push(blob, meta) << '\n';
  });

  // -------------------------------------------------------------- pool-pull
  auto* pull_cmd =
      app.add_subcommand("pool-pull", "Pull a model from the pool by id");
  struct {
    std::string pool, id, out, meta_out;
  } pl;
  pull_cmd->add_option("--pool", pl.pool, "Pool URL (host:port)")
      ->required()
      ->envname("DMT_POOL_ADDR");
  pull_cmd->add_option("--id", pl.id, "Model id (SHA-256 hex)")->required();
  pull_cmd->add_option("--out,-o", pl.out, "Output model file")->required();
  pull_cmd->add_option("--meta-out", pl.meta_out, "Also save metadata JSON");
  pull_cmd->callback([&pl] {
    dmt::PoolClient client(normalize_pool_url(pl.pool));
    const std::string blob = client.pull_blob(pl.id);
    dmt::write_file_atomic(pl.out, blob);
    const dmt::PoolMetadata meta = client.pull_meta(pl.id);
    if (!pl.meta_out.empty())
      dmt::write_file_atomic(pl.meta_out, meta.to_json().dump(2));
    std::cout << "pulled " << pl.id << " (" << meta.kind << ") -> " << pl.out
              << '\n';
  });

  // -------------------------------------------------------------- pool-list
  auto* list_cmd =
      app.add_subcommand("pool-list", "List models stored in the pool");
  struct {
    std::string pool, kind, label;
  } pli;
  list_cmd->add_option("--pool", pli.pool, "Pool URL (host:port)")
      ->required()
      ->envname("DMT_POOL_ADDR");
  list_cmd->add_option("--kind", pli.kind, "Filter by model kind");
  list_cmd->add_option("--label", pli.label, "Filter by dataset label");
  list_cmd->callback([&pli] {
    dmt::PoolClient client(normalize_pool_url(pli.pool));
    for (const dmt::PoolMetadata& m : client.list(pli.kind, pli.label)) {
      std::cout << m.id << ' ' << m.kind;
      if (!m.dataset_label.empty()) std::cout << ' ' << m.dataset_label;
      if (m.recall) std::cout << " recall=" << dmt::format_double(*m.recall);
      if (m.precision)
        std::cout << " precision=" << dmt::format_double(*m.precision);
      if (m.mean_error)
        std::cout << " mean_error=" << dmt::format_double(*m.mean_error);
      std::cout << '\n';
    }
  });

  // --------------------------------------------------------- pool-aggregate
  auto* pagg_cmd = app.add_subcommand(
      "pool-aggregate", "Aggregate pool models by id (optionally push back)");
  struct {
    std::string pool, ids, out, label, deviations, multiplicities;
    bool push = false;
  } pa;
  pagg_cmd->add_option("--pool", pa.pool, "Pool URL (host:port)")
      ->required()
      ->envname("DMT_POOL_ADDR");
  pagg_cmd->add_option("--ids", pa.ids, "Comma-separated model ids")
      ->required();
  pagg_cmd->add_option("--out,-o", pa.out, "Save the aggregate locally");
  pagg_cmd->add_flag("--push", pa.push, "Push the aggregate back to the pool");
  pagg_cmd->add_option("--label", pa.label, "Label for the pushed aggregate");
  pagg_cmd->add_option("--deviations", pa.deviations,
                       "Landmark models: comma-separated weights");
  pagg_cmd->add_option("--multiplicities", pa.multiplicities,
                       "Detector models: comma-separated integer weights");
  pagg_cmd->callback([&pa] {
    std::vector<std::string> ids;
    std::stringstream ss(pa.ids);
    std::string token;
    while (std::getline(ss, token, ','))
      if (!token.empty()) ids.push_back(token);
    dmt::PoolClient client(normalize_pool_url(pa.pool));
    dmt::PoolAggregateOptions opts;
    if (!pa.deviations.empty()) opts.deviations = parse_double_list(pa.deviations);
    if (!pa.multiplicities.empty())
      opts.multiplicities = parse_int_list(pa.multiplicities);
    opts.push_result = pa.push;
    opts.result_label = pa.label;
    const dmt::PoolAggregateResult result =
        dmt::aggregate_from_pool(client, ids, opts);
    if (!pa.out.empty()) {
      dmt::write_file_atomic(pa.out, dmt::serialize_model(result.model));
      std::cout << "wrote " << pa.out << '\n';
    }
    if (pa.push) std::cout << result.pushed_id << '\n';
  });

  // ------------------------------------------------------------- experiment
  auto* exp_cmd = app.add_subcommand(
      "experiment", "Synthesize, split, train parts/unions, aggregate, report");
  dmt::ExperimentConfig exp_config;
  exp_cmd
      ->add_option("--kind", exp_config.kind, "detector | ert")
      ->check(CLI::IsMember({"detector", "ert"}));
  exp_cmd->add_option("--parts", exp_config.parts, "Dataset parts");
  exp_cmd->add_option("--count", exp_config.count, "Corpus size");
  exp_cmd->add_option("--holdout", exp_config.holdout, "Test images");
  exp_cmd->add_option("--seed", exp_config.seed, "RNG seed");
  exp_cmd->add_option("--out-dir", exp_config.work_dir, "Working directory")
      ->required();
  exp_cmd->add_option("--pool", exp_config.pool_url,
                      "Pool URL; models round-trip through it");
  exp_cmd->add_option("--label", exp_config.label, "Dataset label prefix");
  exp_cmd->add_flag("!--no-unions", exp_config.include_unions,
                    "Skip jointly trained union models");
  exp_cmd->add_option("--det-max-epochs",
                      exp_config.detector_params.max_epochs,
                      "Detector: optimizer epoch cap");
  exp_cmd->add_option("--det-mining-rounds",
                      exp_config.detector_params.mining_rounds,
                      "Detector: hard-negative mining rounds");
  exp_cmd->add_option("--ert-cascades", exp_config.ert_params.cascades,
                      "Landmarks: cascade levels");
  exp_cmd->add_option("--ert-trees", exp_config.ert_params.trees_per_cascade,
                      "Landmarks: trees per cascade");
  exp_cmd->add_option("--ert-oversampling", exp_config.ert_params.oversampling,
                      "Landmarks: start shapes per training shape");
  exp_cmd->add_option("--ert-pool-size",
                      exp_config.ert_params.feature_pool_size,
                      "Landmarks: pixel pool size");
  exp_cmd->callback([&exp_config] {
    if (!exp_config.pool_url.empty())
      exp_config.pool_url = normalize_pool_url(exp_config.pool_url);
    exp_config.detector_params.seed = exp_config.seed;
    exp_config.ert_params.seed = exp_config.seed;
    const dmt::ExperimentResult result = dmt::run_experiment(exp_config);
    std::ifstream table(result.table_path);
    std::cout << table.rdbuf();
    std::cout << "results: " << result.csv_path << '\n';
    if (!result.pushed_ids.empty())
      std::cout << "pool aggregate id: " << result.pushed_ids.back() << '\n';
  });

  try {
    app.parse(argc, argv);
    return kExitOk;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return kExitUsage;
  } catch (const dmt::PoolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPool;
  } catch (const dmt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
