#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "markush/dataset.hpp"
#include "markush/gbdt.hpp"
#include "markush/orb.hpp"

namespace markush {

/// Hyperparameter grid for the fixed-feature pipeline; the defaults span
/// 2 x 3 x 2 x 2 = 24 configurations.
struct OrbGrid {
  std::vector<int> orb_features = {500, 2000};
  std::vector<int> n_templates = {50, 100, 250};
  std::vector<int> n_estimators = {500, 1500};
  std::vector<int> max_depth = {6, 15};
};

struct OrbPipelineParams {
  OrbConfig orb;            // max_features is overridden per grid cell
  int template_size = 224;  // annotation-centered template canvas
  double gbdt_learning_rate = 0.3;
};

/// Everything needed to score new images: ORB settings, the chosen template
/// descriptor sets, and the fitted ensemble.
struct OrbModel {
  OrbConfig orb;
  int template_size = 0;
  std::vector<OrbFeatures> template_feats;
  TreeEnsemble gbdt;

  /// Match statistics row for one query image, then ensemble probability.
  double predict_proba(const GrayImage& query) const;
};

struct GridCellScore {
  int orb_features = 0;
  int n_templates = 0;
  int n_estimators = 0;
  int max_depth = 0;
  double val_macro_f1 = 0.0;
};

struct OrbSearchResult {
  std::vector<GridCellScore> cells;  // grid enumeration order
  GridCellScore best;
  OrbModel model;  // best config refit on train + validation
};

/// Exhaustive product search selecting on validation macro F1, winner refit
/// on train + validation. Templates come from the training split's
/// annotations; subsampling below the pool size is seeded and
/// without replacement. The dataset must carry split assignments.
OrbSearchResult grid_search_orb(const LoadedDataset& data, const OrbGrid& grid,
                                const OrbPipelineParams& params, std::uint64_t seed,
                                int jobs = 1);

/// Directory layout: orb_model.json (wrapper + embedded gbdt-v1 object) next
/// to templates/tNNNN.orb descriptor dumps.
void save_orb_model(const OrbModel& model, const std::filesystem::path& dir);
OrbModel load_orb_model(const std::filesystem::path& dir);

}  // namespace markush
