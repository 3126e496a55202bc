#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "markush/dataset.hpp"
#include "markush/grid_search.hpp"
#include "markush/patchgen.hpp"
#include "markush/trainer.hpp"

namespace markush::cli {

/// One experiment = dataset + split + patching + one method block.
struct ExperimentConfig {
  std::string method;  // "orb" or "cnn"
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> data_root;  // defaults to the manifest's directory
  std::uint64_t seed = 0;
  int jobs = 1;

  SplitRatios split_ratios;
  std::uint64_t split_seed = 0;

  PatchSpec patch;

  // cnn
  ConvNetConfig cnn_arch;
  bool cnn_frozen = false;
  int cnn_trials = 0;  // 0 = fixed config below, no hyper search
  TrainConfig cnn_train;

  // orb
  OrbPipelineParams orb_params;
  int orb_features = 2000;
  int orb_templates = 100;
  int orb_estimators = 1500;
  int orb_depth = 6;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Train+evaluate once at image level on the named split; returns macro F1.
/// Artifacts (model, report) land in out_dir when given.
double run_experiment_once(const ExperimentConfig& cfg, const LoadedDataset& data,
                           std::uint64_t run_seed, const std::filesystem::path* out_dir);

LoadedDataset load_split_dataset(const ExperimentConfig& cfg);

}  // namespace markush::cli
