// markush-gate: patch-based Markush structure screening pipelines.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "experiment.hpp"
#include "markush/errors.hpp"
#include "markush/feature_table.hpp"
#include "markush/gbdt.hpp"
#include "markush/grid_search.hpp"
#include "markush/image_io.hpp"
#include "markush/metrics.hpp"
#include "markush/rng.hpp"
#include "markush/synth.hpp"
#include "markush/trainer.hpp"

namespace {

using namespace markush;
using nlohmann::json;

std::optional<std::uint64_t> env_seed_override() {
  const char* env = std::getenv("MARKUSH_GATE_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw FormatError("MARKUSH_GATE_SEED must be an unsigned integer");
  }
}

LoadedDataset load_dataset_cli(const std::filesystem::path& manifest_path,
                               const std::string& data_root, bool need_splits,
                               const SplitRatios& ratios, std::uint64_t split_seed, int jobs) {
  DatasetManifest manifest = load_manifest(manifest_path);
  if (need_splits && !manifest.has_splits())
    manifest = split_dataset(manifest, ratios, split_seed);
  const std::filesystem::path root =
      data_root.empty() ? manifest_path.parent_path() : std::filesystem::path(data_root);
  return load_dataset(manifest, root, jobs);
}

template <typename Fn>
void parallel_indexed(std::size_t n, int jobs, Fn&& fn) {
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(workers)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ------------------------------------------------------------------ synth

int cmd_synth(const std::filesystem::path& config_path, const std::filesystem::path& out_dir) {
  SynthConfig cfg = load_synth_config(config_path);
  if (const auto seed = env_seed_override()) cfg.seed = *seed;
  int skipped = 0;
  const DatasetManifest manifest = generate_corpus(cfg, out_dir, &skipped);
  long long n_true = 0;
  for (const auto& e : manifest.entries) n_true += e.label ? 1 : 0;
  if (skipped > 0) std::cerr << "warning: " << skipped << " indicator placements skipped\n";
  std::cout << "images=" << manifest.entries.size() << " markush=" << n_true
            << " non_markush=" << (static_cast<long long>(manifest.entries.size()) - n_true)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- patches

std::string patch_filename(const Patch& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s_%c_%d_%d_%d.pgm", p.source_image_id.c_str(),
                p.grid == GridId::A ? 'A' : 'B', p.ix, p.iy, p.label ? 1 : 0);
  return buf;
}

int cmd_patches(const std::filesystem::path& manifest_path, const std::string& data_root,
                const std::filesystem::path& out_dir, int patch_size, double threshold,
                int jobs) {
  PatchSpec spec;
  spec.patch_size = patch_size;
  spec.overlap_threshold = threshold;
  spec.validate();

  const LoadedDataset data =
      load_dataset_cli(manifest_path, data_root, /*need_splits=*/false, {}, 0, jobs);

  std::filesystem::create_directories(out_dir / "patches");
  json index;
  index["patch_size"] = patch_size;
  index["overlap_threshold"] = threshold;
  index["patches"] = json::array();
  long long n_true = 0, n_false = 0;
  for (std::size_t i = 0; i < data.manifest.entries.size(); ++i) {
    for (const Patch& p : generate_patches(data.manifest.entries[i], data.images[i], spec)) {
      const std::string name = patch_filename(p);
      save_pgm(p.pixels, out_dir / "patches" / name);
      index["patches"].push_back({{"file", "patches/" + name},
                                  {"image_id", p.source_image_id},
                                  {"grid", p.grid == GridId::A ? "A" : "B"},
                                  {"ix", p.ix},
                                  {"iy", p.iy},
                                  {"origin", {p.origin_x, p.origin_y}},
                                  {"label", p.label}});
      (p.label ? n_true : n_false)++;
    }
  }
  std::ofstream(out_dir / "index.json", std::ios::binary) << index.dump(2) << "\n";
  std::cout << "patches_true=" << n_true << " patches_false=" << n_false << "\n";
  return 0;
}

// --------------------------------------------------------------- train-orb

OrbGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("grid: ") + e.what());
  }
  OrbGrid grid;
  if (doc.contains("orb_features")) grid.orb_features = doc["orb_features"].get<std::vector<int>>();
  if (doc.contains("n_templates")) grid.n_templates = doc["n_templates"].get<std::vector<int>>();
  if (doc.contains("n_estimators")) grid.n_estimators = doc["n_estimators"].get<std::vector<int>>();
  if (doc.contains("max_depth")) grid.max_depth = doc["max_depth"].get<std::vector<int>>();
  return grid;
}

int cmd_train_orb(const std::filesystem::path& manifest_path, const std::string& data_root,
                  const std::filesystem::path& out_dir, const std::string& grid_path,
                  int template_size, std::uint64_t seed, std::uint64_t split_seed, int jobs) {
  if (const auto env = env_seed_override()) seed = split_seed = *env;

  const LoadedDataset data = load_dataset_cli(manifest_path, data_root, /*need_splits=*/true,
                                              SplitRatios{}, split_seed, jobs);
  const OrbGrid grid = grid_path.empty() ? OrbGrid{} : load_grid(grid_path);
  OrbPipelineParams params;
  params.template_size = template_size;

  const OrbSearchResult result = grid_search_orb(data, grid, params, seed, jobs);

  std::filesystem::create_directories(out_dir);
  save_orb_model(result.model, out_dir / "orb_model");
  {
    std::ofstream csv(out_dir / "search.csv", std::ios::binary);
    csv << "orb_features,n_templates,n_estimators,max_depth,val_macro_f1\n";
    char buf[64];
    for (const auto& c : result.cells) {
      std::snprintf(buf, sizeof(buf), "%.17g", c.val_macro_f1);
      csv << c.orb_features << "," << c.n_templates << "," << c.n_estimators << ","
          << c.max_depth << "," << buf << "\n";
    }
  }
  std::cout << "configs=" << result.cells.size()
            << " best_val_macro_f1=" << result.best.val_macro_f1
            << " features=" << result.best.orb_features
            << " templates=" << result.best.n_templates
            << " estimators=" << result.best.n_estimators << " depth=" << result.best.max_depth
            << "\n";
  return 0;
}

// --------------------------------------------------------------- train-cnn

int cmd_train_cnn(const std::filesystem::path& manifest_path, const std::string& data_root,
                  const std::filesystem::path& out_dir, const std::string& mode, int trials,
                  int patch_size, const std::vector<int>& channels, std::uint64_t seed,
                  std::uint64_t split_seed, int max_epochs, int patience, int batch_size,
                  double learning_rate, const std::string& optimizer, double aug_probability,
                  int jobs) {
  if (const auto env = env_seed_override()) seed = split_seed = *env;
  if (mode != "fc_only" && mode != "full_model")
    throw std::invalid_argument("--mode must be fc_only or full_model");

  const LoadedDataset data = load_dataset_cli(manifest_path, data_root, /*need_splits=*/true,
                                              SplitRatios{}, split_seed, jobs);

  PatchSpec spec;
  spec.patch_size = patch_size;
  const auto view_patches = [&](Split s) {
    std::vector<Patch> out;
    for (std::size_t i = 0; i < data.manifest.entries.size(); ++i) {
      if (data.manifest.split_assignment.at(data.manifest.entries[i].image_id) != s) continue;
      for (auto& p : generate_patches(data.manifest.entries[i], data.images[i], spec))
        out.push_back(std::move(p));
    }
    return out;
  };
  const std::vector<Patch> train_patches = view_patches(Split::train);
  const std::vector<Patch> val_patches = view_patches(Split::validation);

  ConvNetConfig arch;
  arch.input_size = patch_size;
  arch.channels = channels;
  const bool frozen = mode == "fc_only";
  if (frozen) std::cerr << "feature layers frozen; only the head will train\n";

  TrainConfig base;
  base.max_epochs = max_epochs;
  base.early_stop_patience = patience;
  base.batch_size = batch_size;
  base.jobs = jobs;

  std::filesystem::create_directories(out_dir);
  char buf[64];

  if (trials > 0) {
    const HyperSearchResult result =
        hyper_search(arch, frozen, train_patches, val_patches, trials, seed, base);
    result.final_model.save(out_dir / "model.tcnn");
    {
      std::ofstream csv(out_dir / "trials.csv", std::ios::binary);
      csv << "trial_index,learning_rate,optimizer,augmentation_probability,best_epoch,"
             "best_val_macro_f1\n";
      for (const auto& t : result.trials) {
        std::snprintf(buf, sizeof(buf), "%.17g", t.config.learning_rate);
        csv << t.trial_index << "," << buf << "," << to_string(t.config.optimizer) << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", t.config.augmentation_probability);
        csv << buf << "," << t.best_epoch << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", t.best_val_macro_f1);
        csv << buf << "\n";
      }
    }
    {
      // The refit runs on the merged split, so the validation column is empty.
      std::ofstream csv(out_dir / "history.csv", std::ios::binary);
      csv << "epoch,train_loss,val_macro_f1\n";
      for (const auto& e : result.final_history) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.train_loss);
        csv << e.epoch << "," << buf << ",\n";
      }
    }
    std::cout << "trials=" << result.trials.size() << " best_epoch=" << result.best_epoch
              << " best_lr=" << result.best_config.learning_rate
              << " best_optimizer=" << to_string(result.best_config.optimizer) << "\n";
  } else {
    TrainConfig tc = base;
    tc.learning_rate = learning_rate;
    tc.optimizer = optimizer_from_string(optimizer);
    tc.augmentation_probability = aug_probability;
    tc.seed = seed;
    ConvNet init = ConvNet::create(arch, seed ^ 0xC4EA7EULL);
    init.frozen_feature_layers = frozen;
    const TrainResult result = train(init, train_patches, val_patches, tc);
    result.model.save(out_dir / "model.tcnn");
    std::ofstream csv(out_dir / "history.csv", std::ios::binary);
    csv << "epoch,train_loss,val_macro_f1\n";
    for (const auto& e : result.history) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.train_loss);
      csv << e.epoch << "," << buf << ",";
      std::snprintf(buf, sizeof(buf), "%.17g", e.val_macro_f1);
      csv << buf << "\n";
    }
    std::cout << "best_epoch=" << result.best_epoch
              << " best_val_macro_f1=" << result.best_val_macro_f1 << "\n";
  }
  return 0;
}

// -------------------------------------------------------------------- eval

bool is_orb_model(const std::filesystem::path& path) {
  return std::filesystem::is_directory(path) && std::filesystem::exists(path / "orb_model.json");
}

int cmd_eval(const std::filesystem::path& manifest_path, const std::string& data_root,
             const std::filesystem::path& model_path, const std::string& level,
             const std::string& split_name, const std::filesystem::path& report_path,
             const std::string& roc_path, double threshold, std::uint64_t split_seed, int jobs) {
  if (const auto env = env_seed_override()) split_seed = *env;
  if (level != "patch" && level != "image")
    throw std::invalid_argument("--level must be patch or image");

  const LoadedDataset data = load_dataset_cli(manifest_path, data_root, /*need_splits=*/true,
                                              SplitRatios{}, split_seed, jobs);
  std::vector<int> rows;
  for (int i = 0; i < static_cast<int>(data.manifest.entries.size()); ++i) {
    const Split s = data.manifest.split_assignment.at(
        data.manifest.entries[static_cast<std::size_t>(i)].image_id);
    if (split_name == "all" || to_string(s) == split_name) rows.push_back(i);
  }
  if (rows.empty()) throw std::invalid_argument("eval: split \"" + split_name + "\" is empty");

  EvalReport report;
  if (is_orb_model(model_path)) {
    if (level == "patch")
      throw std::invalid_argument("eval: the fixed-feature model scores full images only");
    const OrbModel model = load_orb_model(model_path);
    std::vector<double> scores(rows.size());
    parallel_indexed(rows.size(), jobs, [&](std::size_t k) {
      scores[k] = model.predict_proba(data.images[static_cast<std::size_t>(rows[k])]);
    });
    std::vector<bool> gt, pred;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      gt.push_back(data.manifest.entries[static_cast<std::size_t>(rows[k])].label);
      pred.push_back(scores[k] > threshold);
    }
    report = evaluate_run(gt, pred, scores);
  } else {
    const ConvNet model = ConvNet::load(model_path);
    PatchSpec spec;
    spec.patch_size = model.config().input_size;

    std::vector<bool> gt, pred;
    std::vector<double> scores;
    for (const int i : rows) {
      const auto patches = generate_patches(data.manifest.entries[static_cast<std::size_t>(i)],
                                            data.images[static_cast<std::size_t>(i)], spec);
      std::vector<double> probas(patches.size());
      parallel_indexed(patches.size(), jobs, [&](std::size_t k) {
        probas[k] = model.predict_proba(patches[k].pixels);
      });
      if (level == "patch") {
        for (std::size_t k = 0; k < patches.size(); ++k) {
          gt.push_back(patches[k].label);
          pred.push_back(probas[k] > threshold);
          scores.push_back(probas[k]);
        }
      } else {
        std::vector<bool> patch_preds;
        double best = 0.0;
        for (const double p : probas) {
          patch_preds.push_back(p > threshold);
          best = std::max(best, p);
        }
        gt.push_back(data.manifest.entries[static_cast<std::size_t>(i)].label);
        pred.push_back(aggregate_image(patch_preds));
        scores.push_back(best);
      }
    }
    report = evaluate_run(gt, pred, scores);
  }

  if (!report_path.parent_path().empty())
    std::filesystem::create_directories(report_path.parent_path());
  std::ofstream(report_path, std::ios::binary) << report_to_json_text(report);
  if (!roc_path.empty()) {
    if (!report.roc) throw std::runtime_error("eval: no ROC available (single-class split?)");
    std::ofstream(roc_path, std::ios::binary) << roc_to_svg(*report.roc, level + "-level ROC");
  }
  std::cout << "macro_f1=" << report.macro_f1;
  if (report.auc) std::cout << " auc=" << *report.auc;
  std::cout << "\n";
  return 0;
}

// ------------------------------------------------------------------ repeat

int cmd_repeat(const std::filesystem::path& config_path, int runs,
               const std::filesystem::path& out_dir, int jobs_override) {
  if (runs < 2) throw std::invalid_argument("repeat: need at least 2 runs for a margin of error");
  cli::ExperimentConfig cfg = cli::load_experiment_config(config_path);
  if (const auto env = env_seed_override()) cfg.seed = cfg.split_seed = *env;
  if (jobs_override > 0) cfg.jobs = jobs_override;

  const LoadedDataset data = cli::load_split_dataset(cfg);

  std::vector<double> scores;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t run_seed =
        cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1));
    const std::filesystem::path run_dir = out_dir / ("run_" + std::to_string(r));
    const double f1 = cli::run_experiment_once(cfg, data, run_seed, &run_dir);
    std::cerr << "run " << r << ": image macro F1 = " << f1 << "\n";
    scores.push_back(f1);
  }

  const RunSummary summary = summarize_runs(scores, 0.05);
  json doc;
  doc["scores"] = summary.scores;
  doc["mean"] = summary.mean;
  doc["stddev"] = summary.stddev;
  doc["margin_of_error"] = summary.moe;
  doc["alpha"] = summary.alpha;
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "summary.json", std::ios::binary) << doc.dump(2) << "\n";
  std::cout << "mean=" << summary.mean << " moe=" << summary.moe << "\n";
  return 0;
}

// ---------------------------------------------------------------- roc-plot

int cmd_roc_plot(const std::filesystem::path& report_path, const std::filesystem::path& out_path,
                 const std::string& title) {
  std::ifstream in(report_path);
  if (!in) throw IoError("cannot open report " + report_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  if (!doc.contains("roc")) throw FormatError("report has no roc points");
  RocCurve curve;
  for (const auto& p : doc["roc"])
    curve.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  if (doc.contains("auc") && doc["auc"].is_number()) curve.auc = doc["auc"].get<double>();
  std::ofstream(out_path, std::ios::binary) << roc_to_svg(curve, title);
  return 0;
}

// ---------------------------------------------------------------- saliency

int cmd_saliency(const std::filesystem::path& model_path, const std::filesystem::path& patch_path,
                 const std::filesystem::path& out_path) {
  const ConvNet model = ConvNet::load(model_path);
  const GrayImage patch = load_image(patch_path);
  save_pgm(model.saliency_map(patch), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"markush-gate: Markush structure screening for document images"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  std::filesystem::path synth_config, synth_out;
  synth->add_option("-c,--config", synth_config, "synth config JSON")->required();
  synth->add_option("-o,--out", synth_out, "output directory")->required();

  auto* patches = app.add_subcommand("patches", "Cut a dataset into labeled patches");
  std::filesystem::path patches_manifest, patches_out;
  std::string patches_root;
  int patch_size = 224;
  double patches_threshold = 0.5;
  int patches_jobs = 1;
  patches->add_option("--dataset", patches_manifest, "manifest JSON")->required();
  patches->add_option("--data-root", patches_root, "image root (default: manifest dir)");
  patches->add_option("-o,--out", patches_out, "output directory")->required();
  patches->add_option("--patch-size", patch_size, "patch side in pixels (224 or 299)");
  patches->add_option("--overlap-threshold", patches_threshold, "labeling overlap threshold");
  patches->add_option("-j,--jobs", patches_jobs, "worker threads");

  auto* train_orb = app.add_subcommand("train-orb", "Grid-search the fixed-feature pipeline");
  std::filesystem::path to_manifest, to_out;
  std::string to_root, to_grid;
  int to_template_size = 224;
  std::uint64_t to_seed = 0, to_split_seed = 0;
  int to_jobs = 1;
  train_orb->add_option("--dataset", to_manifest)->required();
  train_orb->add_option("--data-root", to_root);
  train_orb->add_option("-o,--out", to_out)->required();
  train_orb->add_option("--grid", to_grid, "grid JSON (default: the built-in 24-cell grid)");
  train_orb->add_option("--template-size", to_template_size);
  train_orb->add_option("--seed", to_seed);
  train_orb->add_option("--split-seed", to_split_seed);
  train_orb->add_option("-j,--jobs", to_jobs);

  auto* train_cnn = app.add_subcommand("train-cnn", "Train the patch classifier");
  std::filesystem::path tc_manifest, tc_out;
  std::string tc_root, tc_mode = "full_model", tc_optimizer = "adam";
  int tc_trials = 25, tc_patch = 224, tc_epochs = 50, tc_patience = 5, tc_batch = 8, tc_jobs = 1;
  std::vector<int> tc_channels = {8, 16, 32, 64};
  std::uint64_t tc_seed = 0, tc_split_seed = 0;
  double tc_lr = 3e-4, tc_aug = 0.0;
  train_cnn->add_option("--dataset", tc_manifest)->required();
  train_cnn->add_option("--data-root", tc_root);
  train_cnn->add_option("-o,--out", tc_out)->required();
  train_cnn->add_option("--mode", tc_mode, "fc_only or full_model");
  train_cnn->add_option("--trials", tc_trials, "hyper-search trials; 0 = fixed config");
  train_cnn->add_option("--patch-size", tc_patch);
  train_cnn->add_option("--channels", tc_channels, "conv channels per block");
  train_cnn->add_option("--seed", tc_seed);
  train_cnn->add_option("--split-seed", tc_split_seed);
  train_cnn->add_option("--max-epochs", tc_epochs);
  train_cnn->add_option("--patience", tc_patience);
  train_cnn->add_option("--batch-size", tc_batch);
  train_cnn->add_option("--lr", tc_lr, "fixed-config learning rate");
  train_cnn->add_option("--optimizer", tc_optimizer, "fixed-config optimizer (adam|sgd)");
  train_cnn->add_option("--aug", tc_aug, "fixed-config augmentation probability");
  train_cnn->add_option("-j,--jobs", tc_jobs);

  auto* eval = app.add_subcommand("eval", "Score a model on a dataset split");
  std::filesystem::path ev_manifest, ev_model, ev_report;
  std::string ev_root, ev_level = "image", ev_split = "test", ev_roc;
  double ev_threshold = 0.5;
  std::uint64_t ev_split_seed = 0;
  int ev_jobs = 1;
  eval->add_option("--dataset", ev_manifest)->required();
  eval->add_option("--data-root", ev_root);
  eval->add_option("--model", ev_model, "orb model directory or .tcnn checkpoint")->required();
  eval->add_option("--level", ev_level, "patch or image");
  eval->add_option("--split", ev_split, "train|validation|test|all");
  eval->add_option("-o,--out", ev_report, "report JSON path")->required();
  eval->add_option("--roc", ev_roc, "also write a ROC SVG here");
  eval->add_option("--threshold", ev_threshold, "patch decision threshold");
  eval->add_option("--split-seed", ev_split_seed);
  eval->add_option("-j,--jobs", ev_jobs);

  auto* repeat = app.add_subcommand("repeat", "Train+eval repeatedly, report mean and margin");
  std::filesystem::path rp_config, rp_out;
  int rp_runs = 5, rp_jobs = 0;
  repeat->add_option("-c,--config", rp_config, "experiment config JSON")->required();
  repeat->add_option("--runs", rp_runs, "number of repeated runs");
  repeat->add_option("-o,--out", rp_out)->required();
  repeat->add_option("-j,--jobs", rp_jobs, "override config jobs");

  auto* roc_plot = app.add_subcommand("roc-plot", "Render a report's ROC points as SVG");
  std::filesystem::path rc_report, rc_out;
  std::string rc_title = "ROC";
  roc_plot->add_option("--report", rc_report)->required();
  roc_plot->add_option("-o,--out", rc_out)->required();
  roc_plot->add_option("--title", rc_title);

  auto* saliency = app.add_subcommand("saliency", "Write a saliency map for one patch");
  std::filesystem::path sa_model, sa_patch, sa_out;
  saliency->add_option("--model", sa_model, ".tcnn checkpoint")->required();
  saliency->add_option("--patch", sa_patch, "patch image (PGM or PNG)")->required();
  saliency->add_option("-o,--out", sa_out, "output PGM")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_config, synth_out);
    if (*patches)
      return cmd_patches(patches_manifest, patches_root, patches_out, patch_size,
                         patches_threshold, patches_jobs);
    if (*train_orb)
      return cmd_train_orb(to_manifest, to_root, to_out, to_grid, to_template_size, to_seed,
                           to_split_seed, to_jobs);
    if (*train_cnn)
      return cmd_train_cnn(tc_manifest, tc_root, tc_out, tc_mode, tc_trials, tc_patch, tc_channels,
                           tc_seed, tc_split_seed, tc_epochs, tc_patience, tc_batch, tc_lr,
                           tc_optimizer, tc_aug, tc_jobs);
    if (*eval)
      return cmd_eval(ev_manifest, ev_root, ev_model, ev_level, ev_split, ev_report, ev_roc,
                      ev_threshold, ev_split_seed, ev_jobs);
    if (*repeat) return cmd_repeat(rp_config, rp_runs, rp_out, rp_jobs);
    if (*roc_plot) return cmd_roc_plot(rc_report, rc_out, rc_title);
    if (*saliency) return cmd_saliency(sa_model, sa_patch, sa_out);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    // Unreadable or unwritable paths come from the invocation, not the run.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
