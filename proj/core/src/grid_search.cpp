#include "markush/grid_search.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "markush/errors.hpp"
#include "markush/metrics.hpp"
#include "markush/patchgen.hpp"
#include "markush/rng.hpp"

namespace markush {

using nlohmann::json;

double OrbModel::predict_proba(const GrayImage& query) const {
  std::vector<std::vector<BinaryDescriptor256>> query_descs(1);
  query_descs[0] = detect_and_describe(query, orb).descriptors;
  std::vector<std::vector<BinaryDescriptor256>> template_descs;
  template_descs.reserve(template_feats.size());
  for (const auto& tf : template_feats) template_descs.push_back(tf.descriptors);
  const FeatureTable table =
      build_feature_table_from_descriptors(query_descs, template_descs, orb.match_ratio);
  return gbdt.predict_proba(std::span<const double>(table.row(0), static_cast<std::size_t>(table.cols())));
}

namespace {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
};

SplitIndices split_indices(const DatasetManifest& manifest) {
  SplitIndices out;
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i) {
    const auto it = manifest.split_assignment.find(manifest.entries[static_cast<std::size_t>(i)].image_id);
    if (it == manifest.split_assignment.end()) continue;
    if (it->second == Split::train) out.train.push_back(i);
    if (it->second == Split::validation) out.validation.push_back(i);
  }
  return out;
}

// First `count` elements of a seeded permutation of 0..n-1.
std::vector<int> seeded_subsample(int n, int count, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(static_cast<std::size_t>(std::min(count, n)));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

OrbSearchResult grid_search_orb(const LoadedDataset& data, const OrbGrid& grid,
                                const OrbPipelineParams& params, std::uint64_t seed, int jobs) {
  if (grid.orb_features.empty() || grid.n_templates.empty() || grid.n_estimators.empty() ||
      grid.max_depth.empty())
    throw std::invalid_argument("grid_search_orb: empty grid");
  if (!data.manifest.has_splits())
    throw std::invalid_argument("grid_search_orb: dataset has no split assignment");

  const SplitIndices idx = split_indices(data.manifest);
  if (idx.train.empty() || idx.validation.empty())
    throw std::invalid_argument("grid_search_orb: train and validation splits must be non-empty");

  // Template pool: every training-split annotation, in entry order.
  std::vector<GrayImage> template_pool;
  for (const int i : idx.train) {
    const auto& meta = data.manifest.entries[static_cast<std::size_t>(i)];
    if (!meta.label) continue;
    for (auto& tmpl :
         extract_templates(meta, data.images[static_cast<std::size_t>(i)], params.template_size))
      template_pool.push_back(std::move(tmpl));
  }
  if (template_pool.empty())
    throw std::runtime_error("grid_search_orb: no templates available in the training split");

  const int max_features =
      *std::max_element(grid.orb_features.begin(), grid.orb_features.end());

  // Describe queries and the pool once at the largest feature budget; the
  // response-ranked cap makes smaller budgets prefixes of this result.
  OrbConfig detect_cfg = params.orb;
  detect_cfg.max_features = max_features;

  std::vector<int> rows = idx.train;
  rows.insert(rows.end(), idx.validation.begin(), idx.validation.end());

  std::vector<std::vector<BinaryDescriptor256>> query_desc_full(rows.size());
  {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(rows.size())));
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t k = begin; k < rows.size(); k += step)
        query_desc_full[k] =
            detect_and_describe(data.images[static_cast<std::size_t>(rows[k])], detect_cfg)
                .descriptors;
    };
    if (workers == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t)
        pool.emplace_back(work, static_cast<std::size_t>(t), workers);
      for (auto& t : pool) t.join();
    }
  }

  std::vector<OrbFeatures> pool_feats(template_pool.size());
  for (std::size_t t = 0; t < template_pool.size(); ++t)
    pool_feats[t] = detect_and_describe(template_pool[t], detect_cfg);

  std::vector<bool> row_labels;
  std::vector<std::string> row_ids;
  for (const int i : rows) {
    row_labels.push_back(data.manifest.entries[static_cast<std::size_t>(i)].label);
    row_ids.push_back(data.manifest.entries[static_cast<std::size_t>(i)].image_id);
  }
  const int n_train = static_cast<int>(idx.train.size());

  OrbSearchResult result;
  double best_score = -1.0;
  int best_cell = -1;
  std::vector<int> best_template_indices;

  for (const int features : grid.orb_features) {
    // Per-feature-budget prefix of the full descriptor sets.
    std::vector<std::vector<BinaryDescriptor256>> query_descs(query_desc_full.size());
    for (std::size_t q = 0; q < query_desc_full.size(); ++q) {
      const std::size_t keep =
          std::min<std::size_t>(query_desc_full[q].size(), static_cast<std::size_t>(features));
      query_descs[q].assign(query_desc_full[q].begin(), query_desc_full[q].begin() + static_cast<std::ptrdiff_t>(keep));
    }

    for (const int m : grid.n_templates) {
      const std::vector<int> chosen =
          seeded_subsample(static_cast<int>(template_pool.size()), m,
                           seed ^ (0x7E00ULL + static_cast<std::uint64_t>(m)));
      std::vector<std::vector<BinaryDescriptor256>> template_descs;
      template_descs.reserve(chosen.size());
      for (const int t : chosen) {
        const auto& full = pool_feats[static_cast<std::size_t>(t)].descriptors;
        const std::size_t keep = std::min<std::size_t>(full.size(), static_cast<std::size_t>(features));
        template_descs.emplace_back(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(keep));
      }

      FeatureTable table = build_feature_table_from_descriptors(query_descs, template_descs,
                                                                params.orb.match_ratio, jobs);
      table.row_ids = row_ids;

      // Train-rows-only view for fitting.
      FeatureTable train_table;
      train_table.n_templates = table.n_templates;
      train_table.labels = std::vector<bool>(row_labels.begin(), row_labels.begin() + n_train);
      train_table.values.assign(table.values.begin(),
                                table.values.begin() + static_cast<std::ptrdiff_t>(n_train) * table.cols());

      for (const int estimators : grid.n_estimators) {
        for (const int depth : grid.max_depth) {
          GbdtParams gp;
          gp.n_estimators = estimators;
          gp.max_depth = depth;
          gp.learning_rate = params.gbdt_learning_rate;
          gp.seed = seed;
          const TreeEnsemble ensemble = fit_gbdt(train_table, gp);

          std::vector<bool> gt, pred;
          for (int r = n_train; r < table.n_rows(); ++r) {
            gt.push_back(row_labels[static_cast<std::size_t>(r)]);
            pred.push_back(ensemble.predict_proba(std::span<const double>(
                               table.row(r), static_cast<std::size_t>(table.cols()))) > 0.5);
          }
          const double score = macro_f1(evaluate_run(gt, pred).cm);

          result.cells.push_back({features, m, estimators, depth, score});
          if (score > best_score) {
            best_score = score;
            best_cell = static_cast<int>(result.cells.size()) - 1;
            best_template_indices = chosen;
          }
        }
      }
    }
  }

  result.best = result.cells[static_cast<std::size_t>(best_cell)];

  // Refit the winner on train + validation.
  {
    const int features = result.best.orb_features;
    std::vector<std::vector<BinaryDescriptor256>> query_descs(query_desc_full.size());
    for (std::size_t q = 0; q < query_desc_full.size(); ++q) {
      const std::size_t keep =
          std::min<std::size_t>(query_desc_full[q].size(), static_cast<std::size_t>(features));
      query_descs[q].assign(query_desc_full[q].begin(), query_desc_full[q].begin() + static_cast<std::ptrdiff_t>(keep));
    }
    std::vector<std::vector<BinaryDescriptor256>> template_descs;
    OrbModel model;
    model.orb = params.orb;
    model.orb.max_features = features;
    model.template_size = params.template_size;
    for (const int t : best_template_indices) {
      OrbFeatures feats = pool_feats[static_cast<std::size_t>(t)];
      if (feats.descriptors.size() > static_cast<std::size_t>(features)) {
        feats.keypoints.resize(static_cast<std::size_t>(features));
        feats.descriptors.resize(static_cast<std::size_t>(features));
      }
      template_descs.push_back(feats.descriptors);
      model.template_feats.push_back(std::move(feats));
    }

    FeatureTable table = build_feature_table_from_descriptors(query_descs, template_descs,
                                                              params.orb.match_ratio, jobs);
    table.labels = row_labels;
    GbdtParams gp;
    gp.n_estimators = result.best.n_estimators;
    gp.max_depth = result.best.max_depth;
    gp.learning_rate = params.gbdt_learning_rate;
    gp.seed = seed;
    model.gbdt = fit_gbdt(table, gp);
    result.model = std::move(model);
  }
  return result;
}

void save_orb_model(const OrbModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "templates");
  json doc;
  doc["format"] = "orb-model-v1";
  doc["orb"] = {{"max_features", model.orb.max_features},
                {"fast_threshold", model.orb.fast_threshold},
                {"n_levels", model.orb.n_levels},
                {"scale_factor", model.orb.scale_factor},
                {"match_ratio", model.orb.match_ratio}};
  doc["template_size"] = model.template_size;
  doc["gbdt"] = json::parse(gbdt_to_json_text(model.gbdt));
  auto files = json::array();
  for (std::size_t t = 0; t < model.template_feats.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "templates/t%04zu.orb", t);
    save_descriptors(model.template_feats[t], dir / name);
    files.push_back(name);
  }
  doc["templates"] = std::move(files);
  std::ofstream out(dir / "orb_model.json", std::ios::binary);
  if (!out) throw IoError("cannot write orb_model.json in " + dir.string());
  out << doc.dump(2) << "\n";
}

OrbModel load_orb_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "orb_model.json");
  if (!in) throw IoError("cannot open " + (dir / "orb_model.json").string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("orb model: not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "orb-model-v1")
    throw FormatError("orb model: expected format orb-model-v1");

  OrbModel model;
  const auto& jorb = doc.at("orb");
  model.orb.max_features = jorb.at("max_features").get<int>();
  model.orb.fast_threshold = jorb.at("fast_threshold").get<int>();
  model.orb.n_levels = jorb.at("n_levels").get<int>();
  model.orb.scale_factor = jorb.at("scale_factor").get<double>();
  model.orb.match_ratio = jorb.at("match_ratio").get<double>();
  model.template_size = doc.at("template_size").get<int>();
  model.gbdt = gbdt_from_json_text(doc.at("gbdt").dump());
  for (const auto& name : doc.at("templates"))
    model.template_feats.push_back(load_descriptors(dir / name.get<std::string>()));
  return model;
}

}  // namespace markush
