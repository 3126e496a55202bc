#include <doctest.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "markush/feature_table.hpp"
#include "markush/gbdt.hpp"
#include "markush/grid_search.hpp"
#include "markush/rng.hpp"
#include "markush/synth.hpp"
#include "test_util.hpp"

using namespace markush;

namespace {

std::vector<BinaryDescriptor256> random_descs(Rng& rng, int n) {
  std::vector<BinaryDescriptor256> out(static_cast<std::size_t>(n));
  for (auto& d : out)
    for (auto& w : d.words) w = rng.next_u64();
  return out;
}

FeatureTable random_table(Rng& rng, int rows, int templates) {
  FeatureTable t;
  t.n_templates = templates;
  t.values.resize(static_cast<std::size_t>(rows) * t.cols());
  for (auto& v : t.values) v = std::floor(rng.uniform(0.0, 257.0));
  std::vector<bool> labels;
  for (int i = 0; i < rows; ++i) labels.push_back(rng.bernoulli(0.5));
  // both classes
  labels[0] = true;
  labels[1] = false;
  t.labels = labels;
  return t;
}

struct StumpOracle {
  bool split = false;
  int feature = -1;
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
  double base_score = 0.0;
};

// Exhaustive best-stump search under the same second-order criterion.
StumpOracle brute_force_stump(const FeatureTable& t, double lambda) {
  const auto& y = *t.labels;
  const int n = t.n_rows();
  double p0 = 0.0;
  for (int i = 0; i < n; ++i) p0 += y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  p0 /= n;

  StumpOracle oracle;
  oracle.base_score = std::log(p0 / (1.0 - p0));
  const double p = 1.0 / (1.0 + std::exp(-oracle.base_score));

  std::vector<double> g(static_cast<std::size_t>(n)), h(static_cast<std::size_t>(n));
  double gsum = 0.0, hsum = 0.0;
  for (int i = 0; i < n; ++i) {
    g[static_cast<std::size_t>(i)] = p - (y[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
    h[static_cast<std::size_t>(i)] = p * (1.0 - p);
    gsum += g[static_cast<std::size_t>(i)];
    hsum += h[static_cast<std::size_t>(i)];
  }

  auto score = [&](double gg, double hh) { return gg * gg / (hh + lambda); };
  double best_gain = 0.0;
  for (int f = 0; f < t.cols(); ++f) {
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) vals.push_back(t.at(i, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 1; k < vals.size(); ++k) {
      const double thr = (vals[k - 1] + vals[k]) / 2.0;
      double gl = 0.0, hl = 0.0;
      for (int i = 0; i < n; ++i)
        if (t.at(i, f) < thr) {
          gl += g[static_cast<std::size_t>(i)];
          hl += h[static_cast<std::size_t>(i)];
        }
      const double gain = 0.5 * (score(gl, hl) + score(gsum - gl, hsum - hl) - score(gsum, hsum));
      if (gain > best_gain) {
        best_gain = gain;
        oracle.split = true;
        oracle.feature = f;
        oracle.threshold = thr;
        oracle.left_value = -gl / (hl + lambda);
        oracle.right_value = -(gsum - gl) / (hsum - hl + lambda);
      }
    }
  }
  return oracle;
}

}  // namespace

TEST_CASE("feature table layout") {
  Rng rng(3);

  SUBCASE("6 columns per template") {
    std::vector<std::vector<BinaryDescriptor256>> queries{random_descs(rng, 4)};
    std::vector<std::vector<BinaryDescriptor256>> templates;
    for (int t = 0; t < 100; ++t) templates.push_back(random_descs(rng, 3));
    const FeatureTable table = build_feature_table_from_descriptors(queries, templates, 0.75);
    CHECK(table.cols() == 600);
    CHECK(table.n_rows() == 1);
  }

  SUBCASE("featureless query pads with the sentinel") {
    std::vector<std::vector<BinaryDescriptor256>> queries{{}};
    std::vector<std::vector<BinaryDescriptor256>> templates{random_descs(rng, 4),
                                                            random_descs(rng, 4)};
    const FeatureTable table = build_feature_table_from_descriptors(queries, templates, 0.75);
    for (int t = 0; t < 2; ++t) {
      CHECK(table.at(0, 6 * t) == 0.0);
      for (int k = 1; k <= 5; ++k) CHECK(table.at(0, 6 * t + k) == kMissingMatchDistance);
    }
  }

  SUBCASE("query identical to its template matches itself at distance zero") {
    const auto descs = random_descs(rng, 8);
    std::vector<std::vector<BinaryDescriptor256>> queries{descs};
    std::vector<std::vector<BinaryDescriptor256>> templates{descs};
    const FeatureTable table = build_feature_table_from_descriptors(queries, templates, 0.75);
    CHECK(table.at(0, 0) == 8.0);
    for (int k = 1; k <= 5; ++k) CHECK(table.at(0, k) == 0.0);
  }

  SUBCASE("permuting templates permutes the 6-column blocks") {
    const auto q = random_descs(rng, 6);
    const auto ta = random_descs(rng, 5);
    const auto tb = random_descs(rng, 5);
    const FeatureTable ab = build_feature_table_from_descriptors({q}, {ta, tb}, 0.75);
    const FeatureTable ba = build_feature_table_from_descriptors({q}, {tb, ta}, 0.75);
    for (int k = 0; k < 6; ++k) {
      CHECK(ab.at(0, k) == ba.at(0, 6 + k));
      CHECK(ab.at(0, 6 + k) == ba.at(0, k));
    }
  }

  SUBCASE("csv export") {
    testutil::TempDir tmp;
    std::vector<std::vector<BinaryDescriptor256>> queries{random_descs(rng, 4)};
    std::vector<std::vector<BinaryDescriptor256>> templates{random_descs(rng, 3)};
    FeatureTable table = build_feature_table_from_descriptors(queries, templates, 0.75);
    table.row_ids = {"imgA"};
    table.labels = std::vector<bool>{true};
    const auto file = tmp.path / "table.csv";
    write_feature_table_csv(table, file);
    std::ifstream in(file);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "image_id,label,t0_count,t0_d1,t0_d2,t0_d3,t0_d4,t0_d5");
    CHECK(row.rfind("imgA,1,", 0) == 0);
  }
}

TEST_CASE("gbdt fitting") {
  SUBCASE("a single stump separates 1-d data") {
    FeatureTable t;
    t.n_templates = 1;  // 6 columns; only column 0 used
    std::vector<bool> labels;
    for (int i = 0; i < 20; ++i) {
      for (int c = 0; c < 6; ++c) t.values.push_back(c == 0 ? (i < 10 ? -1.0 : 1.0) : 0.0);
      labels.push_back(i >= 10);
    }
    t.labels = labels;
    GbdtParams params;
    params.n_estimators = 1;
    params.max_depth = 1;
    const TreeEnsemble model = fit_gbdt(t, params);
    for (int i = 0; i < 20; ++i) {
      const double proba = model.predict_proba(
          std::span<const double>(t.row(i), static_cast<std::size_t>(t.cols())));
      CHECK((proba > 0.5) == labels[static_cast<std::size_t>(i)]);
    }
  }

  SUBCASE("xor needs depth 2") {
    // Slightly unequal quadrant counts: a perfectly balanced xor has exactly
    // zero root gain, so greedy boosting would never take the first split.
    FeatureTable t;
    t.n_templates = 1;
    std::vector<bool> labels;
    const int counts[4] = {11, 10, 9, 10};  // (a,b) = (0,0),(1,0),(0,1),(1,1)
    for (int combo = 0; combo < 4; ++combo) {
      const int a = combo % 2, b = combo / 2;
      for (int i = 0; i < counts[combo]; ++i) {
        for (int c = 0; c < 6; ++c)
          t.values.push_back(c == 0 ? static_cast<double>(a)
                                    : (c == 1 ? static_cast<double>(b) : 0.0));
        labels.push_back((a ^ b) != 0);
      }
    }
    t.labels = labels;
    GbdtParams params;
    params.n_estimators = 15;
    params.max_depth = 2;
    const TreeEnsemble model = fit_gbdt(t, params);
    for (int i = 0; i < t.n_rows(); ++i) {
      const double proba = model.predict_proba(
          std::span<const double>(t.row(i), static_cast<std::size_t>(t.cols())));
      CHECK((proba > 0.5) == labels[static_cast<std::size_t>(i)]);
    }
  }

  SUBCASE("zero estimators predict the class prior") {
    Rng rng(5);
    FeatureTable t = random_table(rng, 10, 1);
    std::vector<bool> labels(10, false);
    for (int i = 0; i < 3; ++i) labels[static_cast<std::size_t>(i)] = true;
    t.labels = labels;
    GbdtParams params;
    params.n_estimators = 0;
    const TreeEnsemble model = fit_gbdt(t, params);
    CHECK(model.predict_proba(std::span<const double>(t.row(0), static_cast<std::size_t>(t.cols()))) ==
          doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("single-class labels rejected") {
    Rng rng(6);
    FeatureTable t = random_table(rng, 8, 1);
    t.labels = std::vector<bool>(8, true);
    CHECK_THROWS_AS(fit_gbdt(t, GbdtParams{}), std::invalid_argument);
  }

  SUBCASE("training loss never increases") {
    Rng rng(7);
    FeatureTable t = random_table(rng, 60, 2);
    GbdtParams params;
    params.n_estimators = 200;
    params.max_depth = 3;
    std::vector<double> losses;
    fit_gbdt(t, params, &losses);
    REQUIRE(losses.size() == 200);
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-12);
  }

  SUBCASE("depth-1 single round equals the brute-force stump") {
    Rng rng(8);
    for (int it = 0; it < 25; ++it) {
      FeatureTable t = random_table(rng, 50, 2);  // 12 features
      GbdtParams params;
      params.n_estimators = 1;
      params.max_depth = 1;
      const TreeEnsemble model = fit_gbdt(t, params);
      const StumpOracle oracle = brute_force_stump(t, params.lambda);

      CHECK(model.base_score == doctest::Approx(oracle.base_score).epsilon(1e-12));
      REQUIRE(model.trees.size() == 1);
      const auto& nodes = model.trees[0].nodes;
      if (oracle.split) {
        REQUIRE(nodes.size() == 3);
        CHECK(nodes[0].feature == oracle.feature);
        CHECK(nodes[0].threshold == doctest::Approx(oracle.threshold).epsilon(1e-12));
        CHECK(nodes[1].leaf_value == doctest::Approx(oracle.left_value).epsilon(1e-10));
        CHECK(nodes[2].leaf_value == doctest::Approx(oracle.right_value).epsilon(1e-10));
      } else {
        CHECK(nodes.size() == 1);
      }
    }
  }
}

TEST_CASE("gbdt prediction mechanics") {
  SUBCASE("empty ensemble with a balanced prior gives 0.5") {
    TreeEnsemble model;
    model.base_score = 0.0;
    model.n_features = 2;
    const double row[2] = {1.0, 2.0};
    CHECK(model.predict_proba(std::span<const double>(row, 2)) == doctest::Approx(0.5));
  }

  SUBCASE("width mismatch rejected") {
    TreeEnsemble model;
    model.n_features = 3;
    const double row[2] = {1.0, 2.0};
    CHECK_THROWS_AS(model.predict_margin(std::span<const double>(row, 2)),
                    std::invalid_argument);
  }

  SUBCASE("hand-evaluated two-tree walk and additivity") {
    TreeEnsemble model;
    model.base_score = 0.25;
    model.learning_rate = 0.3;
    model.n_features = 2;

    RegressionTree stump;
    stump.nodes.resize(3);
    stump.nodes[0] = TreeNode{false, 0, 1.5, 1, 2, 0.0};
    stump.nodes[1] = TreeNode{true, -1, 0.0, -1, -1, -2.0};
    stump.nodes[2] = TreeNode{true, -1, 0.0, -1, -1, 1.0};
    model.trees.push_back(stump);

    const double row_left[2] = {1.0, 9.0};
    const double row_right[2] = {2.0, 9.0};
    CHECK(model.predict_margin(std::span<const double>(row_left, 2)) ==
          doctest::Approx(0.25 + 0.3 * -2.0).epsilon(1e-15));
    CHECK(model.predict_margin(std::span<const double>(row_right, 2)) ==
          doctest::Approx(0.25 + 0.3 * 1.0).epsilon(1e-15));

    RegressionTree bias;
    bias.nodes.push_back(TreeNode{true, -1, 0.0, -1, -1, 0.5});
    model.trees.push_back(bias);
    CHECK(model.predict_margin(std::span<const double>(row_left, 2)) ==
          doctest::Approx(0.25 + 0.3 * -2.0 + 0.3 * 0.5).epsilon(1e-15));
  }
}

TEST_CASE("gbdt json round trip preserves predictions exactly") {
  Rng rng(9);
  FeatureTable t = random_table(rng, 40, 2);
  GbdtParams params;
  params.n_estimators = 25;
  params.max_depth = 4;
  const TreeEnsemble model = fit_gbdt(t, params);
  const TreeEnsemble back = gbdt_from_json_text(gbdt_to_json_text(model));
  for (int i = 0; i < t.n_rows(); ++i) {
    const std::span<const double> row(t.row(i), static_cast<std::size_t>(t.cols()));
    CHECK(model.predict_margin(row) == back.predict_margin(row));
  }
  CHECK(gbdt_to_json_text(model).rfind("{\"base_score\"", 0) == 0);
}

TEST_CASE("grid search on a small synthetic corpus") {
  SynthConfig cfg;
  cfg.n_images = 18;
  cfg.min_w = 120;
  cfg.min_h = 120;
  cfg.max_w = 220;
  cfg.max_h = 220;
  cfg.min_indicator_scale = 12;
  cfg.max_indicator_scale = 20;
  cfg.min_indicators = 1;
  cfg.max_indicators = 3;
  cfg.seed = 77;

  LoadedDataset data;
  for (auto& si : generate_corpus_images(cfg).images) {
    si.meta.path = si.meta.image_id + ".pgm";
    data.manifest.entries.push_back(si.meta);
    data.images.push_back(std::move(si.image));
  }
  data.manifest = split_dataset(data.manifest, SplitRatios{0.5, 0.25, 0.25}, 3);

  OrbGrid grid;
  grid.orb_features = {200};
  grid.n_templates = {4};
  grid.n_estimators = {30};
  grid.max_depth = {2};
  OrbPipelineParams params;
  params.template_size = 64;
  params.orb.fast_threshold = 10;

  const OrbSearchResult result = grid_search_orb(data, grid, params, 11, 2);
  CHECK(result.cells.size() == 1);
  CHECK(result.best.orb_features == 200);
  CHECK(result.best.n_templates == 4);
  CHECK(result.model.template_feats.size() == 4);
  CHECK(result.model.gbdt.n_features == 24);

  SUBCASE("orb model round trips through its directory format") {
    testutil::TempDir tmp;
    save_orb_model(result.model, tmp.path);
    const OrbModel back = load_orb_model(tmp.path);
    CHECK(back.template_feats.size() == result.model.template_feats.size());
    for (std::size_t i = 0; i < data.images.size(); ++i) {
      CHECK(back.predict_proba(data.images[i]) ==
            doctest::Approx(result.model.predict_proba(data.images[i])).epsilon(1e-12));
    }
  }

  SUBCASE("default grid enumerates 24 cells") {
    CHECK(OrbGrid{}.orb_features.size() * OrbGrid{}.n_templates.size() *
              OrbGrid{}.n_estimators.size() * OrbGrid{}.max_depth.size() ==
          24);
  }
}
