#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "markush/feature_table.hpp"

namespace markush {

/// Axis-aligned split node; leaves carry log-odds increments.
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double value_for(std::span<const double> row) const;
};

struct GbdtParams {
  int n_estimators = 1500;
  int max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;  // L2 leaf regularization
  std::uint64_t seed = 0;  // reserved for stochastic variants; exact greedy fitting is deterministic

  void validate() const;
};

/// Boosted trees over logistic loss. prediction = sigmoid(base_score +
/// learning_rate * sum of tree outputs).
struct TreeEnsemble {
  double base_score = 0.0;  // prior log-odds
  double learning_rate = 0.3;
  int max_depth = 0;
  int n_features = 0;
  std::vector<RegressionTree> trees;

  double predict_margin(std::span<const double> row) const;
  double predict_proba(std::span<const double> row) const;
};

/// Second-order gradient boosting with exact greedy splits; tie-breaks go to
/// the lowest feature index, then the lowest threshold. Throws
/// std::invalid_argument when only one class is present.
/// When loss_history is given it receives the mean training logistic loss
/// after each boosting round.
TreeEnsemble fit_gbdt(const FeatureTable& table, const GbdtParams& params,
                      std::vector<double>* loss_history = nullptr);

/// Versioned JSON ("gbdt-v1"); predictions round-trip exactly.
std::string gbdt_to_json_text(const TreeEnsemble& model);
TreeEnsemble gbdt_from_json_text(const std::string& text);
void save_gbdt(const TreeEnsemble& model, const std::filesystem::path& path);
TreeEnsemble load_gbdt(const std::filesystem::path& path);

}  // namespace markush
