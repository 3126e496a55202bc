#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "markush/convnet.hpp"
#include "markush/patchgen.hpp"

namespace markush {

enum class OptimizerKind { adam, sgd };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 3e-4;  // [1e-5, 1e-3]
  OptimizerKind optimizer = OptimizerKind::adam;
  double augmentation_probability = 0.0;  // shared across the three augmentations
  int max_epochs = 50;                    // <= 50
  int early_stop_patience = 5;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  ConvNet model;  // parameters from the best-validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_macro_f1 = 0.0;
};

/// Mini-batch softmax cross-entropy training with per-epoch validation macro
/// F1 and early stopping: no new best for `early_stop_patience` epochs ends
/// the run, and the best-epoch snapshot is returned. Honors the model's
/// frozen_feature_layers flag. Throws std::invalid_argument when the train
/// set has a single class.
TrainResult train(const ConvNet& init, const std::vector<Patch>& train_patches,
                  const std::vector<Patch>& val_patches, const TrainConfig& cfg);

/// Refit path: exactly `epochs` epochs, no validation, final parameters.
ConvNet train_fixed_epochs(const ConvNet& init, const std::vector<Patch>& patches,
                           const TrainConfig& cfg, int epochs,
                           std::vector<EpochRecord>* history = nullptr);

/// Hard-label (threshold 0.5) patch-level macro F1.
double validation_macro_f1(const ConvNet& model, const std::vector<Patch>& patches, int jobs = 1);

struct TrialRecord {
  int trial_index = 0;
  TrainConfig config;
  double best_val_macro_f1 = 0.0;
  int best_epoch = 0;
};

struct HyperSearchResult {
  TrainConfig best_config;
  int best_epoch = 0;
  std::vector<TrialRecord> trials;
  ConvNet final_model;  // best config refit on train + validation
  std::vector<EpochRecord> final_history;
};

/// Random search: learning rate log-uniform over [1e-5, 1e-3], optimizer
/// uniform over {adam, sgd}, augmentation probability uniform over [0, 1].
/// The best trial's config is refit on train + validation for the best
/// trial's epoch count.
HyperSearchResult hyper_search(const ConvNetConfig& arch, bool frozen_features,
                               const std::vector<Patch>& train_patches,
                               const std::vector<Patch>& val_patches, int n_trials,
                               std::uint64_t seed, const TrainConfig& base);

}  // namespace markush
