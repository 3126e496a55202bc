#include "experiment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "markush/errors.hpp"
#include "markush/feature_table.hpp"
#include "markush/gbdt.hpp"
#include "markush/metrics.hpp"
#include "markush/rng.hpp"

namespace markush::cli {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return doc;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const json doc = load_json(path);
  ExperimentConfig cfg;
  cfg.method = doc.at("method").get<std::string>();
  if (cfg.method != "orb" && cfg.method != "cnn")
    throw FormatError("config: method must be \"orb\" or \"cnn\"");
  cfg.dataset = doc.at("dataset").get<std::string>();
  if (doc.contains("data_root")) cfg.data_root = doc["data_root"].get<std::string>();
  cfg.seed = doc.value("seed", 0ULL);
  cfg.jobs = doc.value("jobs", 1);

  if (doc.contains("split")) {
    const auto& s = doc["split"];
    if (s.contains("ratios")) {
      cfg.split_ratios.train = s["ratios"].at(0).get<double>();
      cfg.split_ratios.validation = s["ratios"].at(1).get<double>();
      cfg.split_ratios.test = s["ratios"].at(2).get<double>();
    }
    cfg.split_seed = s.value("seed", cfg.seed);
  } else {
    cfg.split_seed = cfg.seed;
  }

  if (doc.contains("patch")) {
    cfg.patch.patch_size = doc["patch"].value("size", cfg.patch.patch_size);
    cfg.patch.overlap_threshold =
        doc["patch"].value("overlap_threshold", cfg.patch.overlap_threshold);
  }

  if (cfg.method == "cnn") {
    const auto& c = doc.at("cnn");
    cfg.cnn_arch.input_size = c.value("input_size", cfg.patch.patch_size);
    if (c.contains("channels")) cfg.cnn_arch.channels = c["channels"].get<std::vector<int>>();
    const std::string mode = c.value("mode", "full_model");
    if (mode != "full_model" && mode != "fc_only")
      throw FormatError("config: cnn.mode must be \"full_model\" or \"fc_only\"");
    cfg.cnn_frozen = mode == "fc_only";
    cfg.cnn_trials = c.value("trials", 0);
    if (c.contains("train")) {
      const auto& t = c["train"];
      cfg.cnn_train.learning_rate = t.value("learning_rate", cfg.cnn_train.learning_rate);
      if (t.contains("optimizer"))
        cfg.cnn_train.optimizer = optimizer_from_string(t["optimizer"].get<std::string>());
      cfg.cnn_train.augmentation_probability =
          t.value("augmentation_probability", cfg.cnn_train.augmentation_probability);
      cfg.cnn_train.max_epochs = t.value("max_epochs", cfg.cnn_train.max_epochs);
      cfg.cnn_train.early_stop_patience = t.value("patience", cfg.cnn_train.early_stop_patience);
      cfg.cnn_train.batch_size = t.value("batch_size", cfg.cnn_train.batch_size);
    }
    if (cfg.cnn_arch.input_size != cfg.patch.patch_size)
      throw FormatError("config: cnn.input_size must equal patch.size");
  } else {
    const auto& o = doc.at("orb");
    cfg.orb_params.template_size = o.value("template_size", cfg.patch.patch_size);
    cfg.orb_features = o.value("features", cfg.orb_features);
    cfg.orb_templates = o.value("templates", cfg.orb_templates);
    cfg.orb_estimators = o.value("estimators", cfg.orb_estimators);
    cfg.orb_depth = o.value("depth", cfg.orb_depth);
    cfg.orb_params.orb.fast_threshold = o.value("fast_threshold", cfg.orb_params.orb.fast_threshold);
    cfg.orb_params.orb.n_levels = o.value("n_levels", cfg.orb_params.orb.n_levels);
    cfg.orb_params.orb.scale_factor = o.value("scale_factor", cfg.orb_params.orb.scale_factor);
    cfg.orb_params.orb.match_ratio = o.value("ratio", cfg.orb_params.orb.match_ratio);
  }
  return cfg;
}

LoadedDataset load_split_dataset(const ExperimentConfig& cfg) {
  DatasetManifest manifest = load_manifest(cfg.dataset);
  if (!manifest.has_splits())
    manifest = split_dataset(manifest, cfg.split_ratios, cfg.split_seed);
  const std::filesystem::path root =
      cfg.data_root ? *cfg.data_root : cfg.dataset.parent_path();
  return load_dataset(manifest, root, cfg.jobs);
}

namespace {

struct SplitView {
  std::vector<int> train, validation, test;
};

SplitView split_view(const DatasetManifest& manifest) {
  SplitView v;
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    switch (manifest.split_assignment.at(manifest.entries[static_cast<std::size_t>(i)].image_id)) {
      case Split::train: v.train.push_back(i); break;
      case Split::validation: v.validation.push_back(i); break;
      case Split::test: v.test.push_back(i); break;
    }
  }
  return v;
}

double run_orb_once(const ExperimentConfig& cfg, const LoadedDataset& data,
                    std::uint64_t run_seed, const std::filesystem::path* out_dir) {
  const SplitView view = split_view(data.manifest);

  // Template pool from the training split only.
  std::vector<GrayImage> pool;
  for (const int i : view.train) {
    const auto& meta = data.manifest.entries[static_cast<std::size_t>(i)];
    if (!meta.label) continue;
    for (auto& t :
         extract_templates(meta, data.images[static_cast<std::size_t>(i)], cfg.orb_params.template_size))
      pool.push_back(std::move(t));
  }
  if (pool.empty()) throw std::runtime_error("orb: no templates available in the training split");

  std::vector<int> chosen(static_cast<std::size_t>(pool.size()));
  std::iota(chosen.begin(), chosen.end(), 0);
  if (static_cast<int>(pool.size()) > cfg.orb_templates) {
    Rng rng(run_seed ^ 0x7E77ULL);
    rng.shuffle(chosen);
    chosen.resize(static_cast<std::size_t>(cfg.orb_templates));
    std::sort(chosen.begin(), chosen.end());
  }

  OrbModel model;
  model.orb = cfg.orb_params.orb;
  model.orb.max_features = cfg.orb_features;
  model.template_size = cfg.orb_params.template_size;

  std::vector<std::vector<BinaryDescriptor256>> template_descs;
  for (const int t : chosen) {
    OrbFeatures feats = detect_and_describe(pool[static_cast<std::size_t>(t)], model.orb);
    template_descs.push_back(feats.descriptors);
    model.template_feats.push_back(std::move(feats));
  }

  // Fit on train + validation rows.
  std::vector<int> fit_rows = view.train;
  fit_rows.insert(fit_rows.end(), view.validation.begin(), view.validation.end());
  std::vector<std::vector<BinaryDescriptor256>> query_descs(fit_rows.size());
  {
    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(fit_rows.size())));
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t k = begin; k < fit_rows.size(); k += step)
        query_descs[k] =
            detect_and_describe(data.images[static_cast<std::size_t>(fit_rows[k])], model.orb)
                .descriptors;
    };
    if (workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> threads;
      for (int t = 0; t < workers; ++t)
        threads.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(workers));
      for (auto& t : threads) t.join();
    }
  }

  FeatureTable table = build_feature_table_from_descriptors(query_descs, template_descs,
                                                            model.orb.match_ratio, cfg.jobs);
  std::vector<bool> labels;
  for (const int i : fit_rows)
    labels.push_back(data.manifest.entries[static_cast<std::size_t>(i)].label);
  table.labels = labels;

  GbdtParams gp;
  gp.n_estimators = cfg.orb_estimators;
  gp.max_depth = cfg.orb_depth;
  gp.learning_rate = cfg.orb_params.gbdt_learning_rate;
  gp.seed = run_seed;
  model.gbdt = fit_gbdt(table, gp);

  // Image-level test evaluation.
  std::vector<bool> gt, pred;
  std::vector<double> scores;
  for (const int i : view.test) {
    const double proba = model.predict_proba(data.images[static_cast<std::size_t>(i)]);
    gt.push_back(data.manifest.entries[static_cast<std::size_t>(i)].label);
    pred.push_back(proba > 0.5);
    scores.push_back(proba);
  }
  const EvalReport report = evaluate_run(gt, pred, scores);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_orb_model(model, *out_dir / "orb_model");
    std::ofstream(*out_dir / "report.json", std::ios::binary) << report_to_json_text(report);
  }
  return report.macro_f1;
}

std::vector<Patch> patches_for(const LoadedDataset& data, const std::vector<int>& rows,
                               const PatchSpec& spec) {
  std::vector<Patch> out;
  for (const int i : rows) {
    auto patches = generate_patches(data.manifest.entries[static_cast<std::size_t>(i)],
                                    data.images[static_cast<std::size_t>(i)], spec);
    for (auto& p : patches) out.push_back(std::move(p));
  }
  return out;
}

double run_cnn_once(const ExperimentConfig& cfg, const LoadedDataset& data,
                    std::uint64_t run_seed, const std::filesystem::path* out_dir) {
  const SplitView view = split_view(data.manifest);
  const std::vector<Patch> train_patches = patches_for(data, view.train, cfg.patch);
  const std::vector<Patch> val_patches = patches_for(data, view.validation, cfg.patch);

  ConvNet final_model;
  if (cfg.cnn_trials > 0) {
    TrainConfig base = cfg.cnn_train;
    base.jobs = cfg.jobs;
    const HyperSearchResult r = hyper_search(cfg.cnn_arch, cfg.cnn_frozen, train_patches,
                                             val_patches, cfg.cnn_trials, run_seed, base);
    final_model = r.final_model;
  } else {
    TrainConfig tc = cfg.cnn_train;
    tc.jobs = cfg.jobs;
    tc.seed = run_seed;
    ConvNet init = ConvNet::create(cfg.cnn_arch, run_seed ^ 0xC4EA7EULL);
    init.frozen_feature_layers = cfg.cnn_frozen;
    const TrainResult tr = train(init, train_patches, val_patches, tc);

    // Paper protocol: refit on train + validation for the best epoch count.
    std::vector<Patch> merged = train_patches;
    merged.insert(merged.end(), val_patches.begin(), val_patches.end());
    TrainConfig refit = tc;
    refit.seed = run_seed ^ 0x52F1ULL;
    ConvNet refit_init = ConvNet::create(cfg.cnn_arch, run_seed ^ 0xC4EA7EULL);
    refit_init.frozen_feature_layers = cfg.cnn_frozen;
    final_model = train_fixed_epochs(refit_init, merged, refit, tr.best_epoch);
  }

  // Image-level test evaluation: hard patch labels, OR aggregation.
  std::vector<bool> gt, pred;
  std::vector<double> scores;
  for (const int i : view.test) {
    const auto patches = generate_patches(data.manifest.entries[static_cast<std::size_t>(i)],
                                          data.images[static_cast<std::size_t>(i)], cfg.patch);
    std::vector<bool> patch_preds;
    double best = 0.0;
    std::vector<double> probas(patches.size());
    const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(patches.size())));
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t k = begin; k < patches.size(); k += step)
        probas[k] = final_model.predict_proba(patches[k].pixels);
    };
    if (workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> threads;
      for (int t = 0; t < workers; ++t)
        threads.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(workers));
      for (auto& t : threads) t.join();
    }
    for (const double p : probas) {
      patch_preds.push_back(p > 0.5);
      best = std::max(best, p);
    }
    gt.push_back(data.manifest.entries[static_cast<std::size_t>(i)].label);
    pred.push_back(aggregate_image(patch_preds));
    scores.push_back(best);
  }
  const EvalReport report = evaluate_run(gt, pred, scores);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    final_model.save(*out_dir / "model.tcnn");
    std::ofstream(*out_dir / "report.json", std::ios::binary) << report_to_json_text(report);
  }
  return report.macro_f1;
}

}  // namespace

double run_experiment_once(const ExperimentConfig& cfg, const LoadedDataset& data,
                           std::uint64_t run_seed, const std::filesystem::path* out_dir) {
  if (cfg.method == "orb") return run_orb_once(cfg, data, run_seed, out_dir);
  return run_cnn_once(cfg, data, run_seed, out_dir);
}

}  // namespace markush::cli
