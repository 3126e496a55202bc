#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "markush/metrics.hpp"
#include "markush/rng.hpp"

using namespace markush;

namespace {

// Pairwise concordance oracle for AUC (Mann-Whitney with ties at 1/2).
double auc_pairwise(const std::vector<bool>& labels, const std::vector<double>& scores) {
  double concordant = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        concordant += 1.0;
      else if (scores[i] == scores[j])
        concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

// Critical two-sided t values at alpha = 0.05 for df 1..30, standard table.
constexpr double kTTable[30] = {
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

}  // namespace

TEST_CASE("macro F1 basics") {
  SUBCASE("perfect classifier") {
    CHECK(macro_f1(ConfusionMatrix{10, 0, 0, 5}) == doctest::Approx(1.0));
  }
  SUBCASE("0/0 slices contribute zero") {
    // Everything predicted true: the false class has precision 0 recall 0.
    const ConfusionMatrix cm{5, 0, 5, 0};
    const auto scores = class_scores_false(cm);
    CHECK(scores.precision == 0.0);
    CHECK(scores.recall == 0.0);
    CHECK(scores.f1 == 0.0);
    CHECK(macro_f1(cm) == doctest::Approx(0.5 * class_scores_true(cm).f1));
  }
  SUBCASE("empty matrix rejected") {
    CHECK_THROWS_AS(macro_f1(ConfusionMatrix{}), std::invalid_argument);
  }
}

TEST_CASE("macro F1 reproduces the published confusion matrices") {
  // Hand-evaluated: per-class F1 = 2 tp / (2 tp + fp + fn), macro = mean.
  struct Case {
    ConfusionMatrix cm;
    double expected;
  };
  const Case cases[] = {
      {{808, 74, 161, 147}, 0.714403597299},  {{906, 40, 45, 203}, 0.891038159727},
      {{625, 28, 311, 52}, 0.510710627665},   {{922, 12, 114, 104}, 0.779397550078},
      {{690, 89, 99, 118}, 0.718352907201},   {{742, 10, 64, 260}, 0.913962042332},
  };
  for (const auto& c : cases) CHECK(macro_f1(c.cm) == doctest::Approx(c.expected).epsilon(1e-9));
}

TEST_CASE("macro F1 is symmetric under class-encoding swap") {
  Rng rng(17);
  for (int it = 0; it < 200; ++it) {
    const ConfusionMatrix cm{rng.uniform_int(0, 50), rng.uniform_int(0, 50),
                             rng.uniform_int(0, 50), rng.uniform_int(1, 50)};
    const ConfusionMatrix swapped{cm.tn, cm.fp, cm.fn, cm.tp};
    CHECK(macro_f1(cm) == doctest::Approx(macro_f1(swapped)).epsilon(1e-12));
  }
}

TEST_CASE("aggregate_image") {
  CHECK(aggregate_image({false, false, true}));
  CHECK_FALSE(aggregate_image({false, false, false}));
  CHECK_THROWS_AS(aggregate_image({}), std::invalid_argument);

  SUBCASE("monotone under false-to-true flips") {
    Rng rng(9);
    for (int it = 0; it < 300; ++it) {
      std::vector<bool> labels;
      for (int k = rng.uniform_int(1, 12); k > 0; --k) labels.push_back(rng.bernoulli(0.3));
      const bool before = aggregate_image(labels);
      const int flip = rng.uniform_int(0, static_cast<int>(labels.size()) - 1);
      labels[static_cast<std::size_t>(flip)] = true;
      CHECK(aggregate_image(labels) >= before);
    }
  }
  SUBCASE("idempotent under all-false concatenation") {
    std::vector<bool> labels{true, false};
    std::vector<bool> extended = labels;
    extended.insert(extended.end(), {false, false, false});
    CHECK(aggregate_image(labels) == aggregate_image(extended));
  }
}

TEST_CASE("student t critical values match the committed table") {
  for (int df = 1; df <= 30; ++df)
    CHECK(std::abs(student_t_critical(0.05, df) - kTTable[df - 1]) <= 1e-3);
}

TEST_CASE("student t critical value, df 4") {
  CHECK(std::abs(student_t_critical(0.05, 4) - 2.7764451051977987) < 1e-8);
}

TEST_CASE("margin of error") {
  SUBCASE("equal scores give zero") {
    CHECK(margin_of_error({0.5, 0.5, 0.5}, 0.05) == doctest::Approx(0.0));
  }
  SUBCASE("worked five-run example") {
    const double moe = margin_of_error({0.90, 0.92, 0.91, 0.93, 0.89}, 0.05);
    CHECK(moe == doctest::Approx(0.019632431614775625).epsilon(1e-9));
    CHECK(moe == doctest::Approx(0.0196).epsilon(1e-3));
  }
  SUBCASE("scales linearly with sigma") {
    const std::vector<double> s{0.1, 0.2, 0.35, 0.4, 0.42};
    std::vector<double> doubled;
    for (double v : s) doubled.push_back(2.0 * v);
    CHECK(margin_of_error(doubled, 0.05) ==
          doctest::Approx(2.0 * margin_of_error(s, 0.05)).epsilon(1e-12));
  }
  SUBCASE("matches t * sigma / sqrt(n) directly") {
    const std::vector<double> s{0.3, 0.6, 0.9, 0.1};
    const double mean = (0.3 + 0.6 + 0.9 + 0.1) / 4.0;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / 3.0);
    CHECK(margin_of_error(s, 0.05) ==
          doctest::Approx(student_t_critical(0.05, 3) * sigma / 2.0).epsilon(1e-12));
  }
  SUBCASE("needs two scores") {
    CHECK_THROWS_AS(margin_of_error({0.5}, 0.05), std::invalid_argument);
  }
}

TEST_CASE("roc curve") {
  SUBCASE("perfect separation") {
    const RocCurve c = roc_curve({true, true, false, false}, {0.9, 0.8, 0.2, 0.1});
    CHECK(c.auc == doctest::Approx(1.0));
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
  }
  SUBCASE("identical scores give the diagonal") {
    const RocCurve c = roc_curve({true, false, true, false}, {0.5, 0.5, 0.5, 0.5});
    CHECK(c.auc == doctest::Approx(0.5));
    CHECK(c.points.size() == 2);
  }
  SUBCASE("worked example") {
    const RocCurve c = roc_curve({true, false, true, false}, {0.9, 0.8, 0.7, 0.1});
    CHECK(c.auc == doctest::Approx(0.75));
  }
  SUBCASE("matches the pairwise oracle on random sets") {
    Rng rng(41);
    for (int it = 0; it < 300; ++it) {
      std::vector<bool> labels{true, false};  // both classes guaranteed
      std::vector<double> scores{rng.uniform(), rng.uniform()};
      for (int k = rng.uniform_int(0, 20); k > 0; --k) {
        labels.push_back(rng.bernoulli(0.5));
        scores.push_back(rng.uniform_int(0, 9) / 10.0);  // frequent ties
      }
      CHECK(roc_curve(labels, scores).auc ==
            doctest::Approx(auc_pairwise(labels, scores)).epsilon(1e-12));
    }
  }
  SUBCASE("single class rejected") {
    CHECK_THROWS_AS(roc_curve({true, true}, {0.5, 0.4}), std::invalid_argument);
  }
}

TEST_CASE("naive image-level TPR") {
  CHECK(naive_image_tpr(0.7, 1) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::abs(naive_image_tpr(0.7, 5) - 0.931) < 5e-4);
  CHECK(std::abs(naive_image_tpr(0.7, 10) - 0.965) < 5e-4);
  CHECK_THROWS_AS(naive_image_tpr(0.7, 0), std::invalid_argument);
}

TEST_CASE("evaluate_run") {
  SUBCASE("all correct") {
    const EvalReport r = evaluate_run({true, false, true}, {true, false, true}, {0.9, 0.1, 0.8});
    CHECK(r.macro_f1 == doctest::Approx(1.0));
    REQUIRE(r.auc.has_value());
    CHECK(*r.auc == doctest::Approx(1.0));
  }
  SUBCASE("published counts reproduce") {
    std::vector<bool> gt, pred;
    auto add = [&](int count, bool g, bool p) {
      for (int i = 0; i < count; ++i) {
        gt.push_back(g);
        pred.push_back(p);
      }
    };
    add(690, true, true);
    add(89, true, false);
    add(99, false, true);
    add(118, false, false);
    const EvalReport r = evaluate_run(gt, pred);
    CHECK(r.cm == ConfusionMatrix{690, 89, 99, 118});
    CHECK(r.macro_f1 == doctest::Approx(0.718352907201).epsilon(1e-9));
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(evaluate_run({true}, {true, false}), std::invalid_argument);
  }
  SUBCASE("json report carries the pinned fields") {
    const EvalReport r = evaluate_run({true, false}, {true, false}, {0.8, 0.2});
    const std::string json = report_to_json_text(r);
    CHECK(json.find("\"cm\"") != std::string::npos);
    CHECK(json.find("\"per_class\"") != std::string::npos);
    CHECK(json.find("\"macro_f1\"") != std::string::npos);
    CHECK(json.find("\"auc\"") != std::string::npos);
  }
}

TEST_CASE("summarize_runs") {
  const RunSummary s = summarize_runs({0.90, 0.92, 0.91, 0.93, 0.89});
  CHECK(s.mean == doctest::Approx(0.91));
  CHECK(s.stddev == doctest::Approx(0.01581138830084191).epsilon(1e-9));
  CHECK(s.moe == doctest::Approx(0.019632431614775625).epsilon(1e-9));
  CHECK_THROWS_AS(summarize_runs({0.5}), std::invalid_argument);
}

TEST_CASE("roc svg is a plausible document") {
  const RocCurve c = roc_curve({true, false}, {0.9, 0.1});
  const std::string svg = roc_to_svg(c, "test");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
