#include "markush/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "markush/errors.hpp"

namespace markush {

using nlohmann::json;

void GbdtParams::validate() const {
  if (n_estimators < 0) throw std::invalid_argument("gbdt: n_estimators must be >= 0");
  if (max_depth < 0) throw std::invalid_argument("gbdt: max_depth must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("gbdt: learning_rate must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("gbdt: lambda must be >= 0");
}

double RegressionTree::value_for(std::span<const double> row) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].leaf_value;
}

double TreeEnsemble::predict_margin(std::span<const double> row) const {
  if (static_cast<int>(row.size()) != n_features)
    throw std::invalid_argument("gbdt: feature width mismatch");
  double margin = base_score;
  for (const auto& tree : trees) margin += learning_rate * tree.value_for(row);
  return margin;
}

double TreeEnsemble::predict_proba(std::span<const double> row) const {
  return 1.0 / (1.0 + std::exp(-predict_margin(row)));
}

namespace {

double softplus(double x) {
  // log(1 + exp(x)) without overflow.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

struct NodeStats {
  double grad_sum = 0.0;
  double hess_sum = 0.0;
  long long count = 0;
};

struct SplitChoice {
  double gain = 0.0;  // only splits with gain > 0 are taken
  int feature = -1;
  double threshold = 0.0;
  double left_grad = 0.0, left_hess = 0.0;
  long long left_count = 0;
};

double leaf_weight(double grad, double hess, double lambda) { return -grad / (hess + lambda); }

double split_gain(const NodeStats& parent, double gl, double hl, double lambda) {
  const double gr = parent.grad_sum - gl;
  const double hr = parent.hess_sum - hl;
  auto score = [&](double g, double h) { return g * g / (h + lambda); };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(parent.grad_sum, parent.hess_sum));
}

}  // namespace

TreeEnsemble fit_gbdt(const FeatureTable& table, const GbdtParams& params,
                      std::vector<double>* loss_history) {
  params.validate();
  if (!table.labels) throw std::invalid_argument("gbdt: table has no labels");
  const int n = table.n_rows();
  const int m = table.cols();
  if (n < 2) throw std::invalid_argument("gbdt: need at least 2 rows");

  const auto& labels = *table.labels;
  long long positives = 0;
  for (int i = 0; i < n; ++i) positives += labels[static_cast<std::size_t>(i)] ? 1 : 0;
  if (positives == 0 || positives == n)
    throw std::invalid_argument("gbdt: degenerate training set (single class)");

  // Rows ordered by each feature, computed once and reused every round.
  std::vector<std::vector<int>> sorted_rows(static_cast<std::size_t>(m));
  for (int f = 0; f < m; ++f) {
    auto& order = sorted_rows[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return table.at(a, f) < table.at(b, f); });
  }

  TreeEnsemble model;
  model.learning_rate = params.learning_rate;
  model.max_depth = params.max_depth;
  model.n_features = m;
  const double prior = static_cast<double>(positives) / static_cast<double>(n);
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> margin(static_cast<std::size_t>(n), model.base_score);
  std::vector<double> grad(static_cast<std::size_t>(n));
  std::vector<double> hess(static_cast<std::size_t>(n));
  std::vector<int> node_of(static_cast<std::size_t>(n));

  if (loss_history) loss_history->clear();

  for (int round = 0; round < params.n_estimators; ++round) {
    for (int i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margin[static_cast<std::size_t>(i)]));
      const double y = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      grad[static_cast<std::size_t>(i)] = p - y;
      hess[static_cast<std::size_t>(i)] = p * (1.0 - p);
    }

    RegressionTree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<NodeStats> stats(1);
    for (int i = 0; i < n; ++i) {
      node_of[static_cast<std::size_t>(i)] = 0;
      stats[0].grad_sum += grad[static_cast<std::size_t>(i)];
      stats[0].hess_sum += hess[static_cast<std::size_t>(i)];
      ++stats[0].count;
    }

    std::vector<int> active{0};  // node ids open at the current depth
    for (int depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
      // slot_of[node] indexes the per-level accumulators.
      std::vector<int> slot_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s)
        slot_of[static_cast<std::size_t>(active[s])] = static_cast<int>(s);

      std::vector<SplitChoice> best(active.size());

      std::vector<double> acc_grad(active.size());
      std::vector<double> acc_hess(active.size());
      std::vector<long long> acc_count(active.size());
      std::vector<double> prev_value(active.size());

      for (int f = 0; f < m; ++f) {
        std::fill(acc_grad.begin(), acc_grad.end(), 0.0);
        std::fill(acc_hess.begin(), acc_hess.end(), 0.0);
        std::fill(acc_count.begin(), acc_count.end(), 0);

        for (const int row : sorted_rows[static_cast<std::size_t>(f)]) {
          const int node = node_of[static_cast<std::size_t>(row)];
          if (node < 0) continue;
          const int slot = slot_of[static_cast<std::size_t>(node)];
          if (slot < 0) continue;
          const double v = table.at(row, f);
          const std::size_t us = static_cast<std::size_t>(slot);
          if (acc_count[us] > 0 && v > prev_value[us] &&
              acc_count[us] < stats[static_cast<std::size_t>(node)].count) {
            const double gain = split_gain(stats[static_cast<std::size_t>(node)], acc_grad[us],
                                           acc_hess[us], params.lambda);
            // Strict improvement keeps the lowest feature index and, within
            // a feature, the lowest threshold on ties.
            if (gain > best[us].gain) {
              best[us] = SplitChoice{gain,        f,           (prev_value[us] + v) / 2.0,
                                     acc_grad[us], acc_hess[us], acc_count[us]};
            }
          }
          acc_grad[us] += grad[static_cast<std::size_t>(row)];
          acc_hess[us] += hess[static_cast<std::size_t>(row)];
          ++acc_count[us];
          prev_value[us] = v;
        }
      }

      // Materialize the accepted splits, then re-partition rows.
      std::vector<int> next_active;
      for (std::size_t s = 0; s < active.size(); ++s) {
        const int node = active[s];
        if (best[s].feature < 0 || !(best[s].gain > 0.0)) continue;  // stays a leaf
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node)];
        parent.is_leaf = false;
        parent.feature = best[s].feature;
        parent.threshold = best[s].threshold;
        parent.left = static_cast<int>(tree.nodes.size());
        parent.right = parent.left + 1;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});

        NodeStats left_stats{best[s].left_grad, best[s].left_hess, best[s].left_count};
        NodeStats right_stats{stats[static_cast<std::size_t>(node)].grad_sum - left_stats.grad_sum,
                              stats[static_cast<std::size_t>(node)].hess_sum - left_stats.hess_sum,
                              stats[static_cast<std::size_t>(node)].count - left_stats.count};
        stats.resize(tree.nodes.size());
        stats[static_cast<std::size_t>(parent.left)] = left_stats;
        stats[static_cast<std::size_t>(parent.right)] = right_stats;
        next_active.push_back(parent.left);
        next_active.push_back(parent.right);
      }

      if (next_active.empty()) break;
      for (int i = 0; i < n; ++i) {
        int& node = node_of[static_cast<std::size_t>(i)];
        const TreeNode& tn = tree.nodes[static_cast<std::size_t>(node)];
        if (!tn.is_leaf)
          node = table.at(i, tn.feature) < tn.threshold ? tn.left : tn.right;
      }
      active = std::move(next_active);
    }

    for (std::size_t ni = 0; ni < tree.nodes.size(); ++ni) {
      if (tree.nodes[ni].is_leaf)
        tree.nodes[ni].leaf_value =
            leaf_weight(stats[ni].grad_sum, stats[ni].hess_sum, params.lambda);
    }

    for (int i = 0; i < n; ++i) {
      int node = node_of[static_cast<std::size_t>(i)];
      // Rows in still-open nodes sit at leaves of the finished tree too.
      margin[static_cast<std::size_t>(i)] +=
          params.learning_rate * tree.nodes[static_cast<std::size_t>(node)].leaf_value;
    }

    model.trees.push_back(std::move(tree));

    if (loss_history) {
      double loss = 0.0;
      for (int i = 0; i < n; ++i) {
        const double z = labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
        loss += softplus(-z * margin[static_cast<std::size_t>(i)]);
      }
      loss_history->push_back(loss / static_cast<double>(n));
    }
  }
  return model;
}

std::string gbdt_to_json_text(const TreeEnsemble& model) {
  json doc;
  doc["format"] = "gbdt-v1";
  doc["base_score"] = model.base_score;
  doc["learning_rate"] = model.learning_rate;
  doc["max_depth"] = model.max_depth;
  doc["n_features"] = model.n_features;
  auto trees = json::array();
  for (const auto& tree : model.trees) {
    auto nodes = json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf)
        nodes.push_back({{"v", n.leaf_value}});
      else
        nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees);
  return doc.dump() + "\n";
}

TreeEnsemble gbdt_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("gbdt: not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "gbdt-v1")
    throw FormatError("gbdt: expected format gbdt-v1");

  TreeEnsemble model;
  model.base_score = doc.at("base_score").get<double>();
  model.learning_rate = doc.at("learning_rate").get<double>();
  model.max_depth = doc.at("max_depth").get<int>();
  model.n_features = doc.at("n_features").get<int>();
  for (const auto& jtree : doc.at("trees")) {
    RegressionTree tree;
    for (const auto& jn : jtree) {
      TreeNode n;
      if (jn.contains("v")) {
        n.is_leaf = true;
        n.leaf_value = jn.at("v").get<double>();
      } else {
        n.is_leaf = false;
        n.feature = jn.at("f").get<int>();
        n.threshold = jn.at("t").get<double>();
        n.left = jn.at("l").get<int>();
        n.right = jn.at("r").get<int>();
      }
      tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) throw FormatError("gbdt: empty tree");
    model.trees.push_back(std::move(tree));
  }
  return model;
}

void save_gbdt(const TreeEnsemble& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << gbdt_to_json_text(model);
}

TreeEnsemble load_gbdt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return gbdt_from_json_text(text);
}

}  // namespace markush
