#pragma once

#include <optional>
#include <string>
#include <vector>

namespace markush {

struct ConfusionMatrix {
  long long tp = 0;  // GT true,  predicted true
  long long fn = 0;  // GT true,  predicted false
  long long fp = 0;  // GT false, predicted true
  long long tn = 0;  // GT false, predicted false

  long long total() const { return tp + fn + fp + tn; }
  void add(bool ground_truth, bool predicted);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class precision/recall/F1 with the 0/0 -> 0 convention.
ClassScores class_scores_true(const ConfusionMatrix& cm);
ClassScores class_scores_false(const ConfusionMatrix& cm);

/// Unweighted mean of the two class F1 scores.
double macro_f1(const ConfusionMatrix& cm);

/// OR over the patch labels. Throws std::invalid_argument on an empty list.
bool aggregate_image(const std::vector<bool>& patch_labels);

/// Two-sided Student-t critical value t_{alpha/2, df}, computed by numeric
/// inversion of the regularized incomplete beta function.
double student_t_critical(double alpha, int df);

/// t_{alpha/2, n-1} * sigma / sqrt(n) with the sample (n-1) deviation.
double margin_of_error(const std::vector<double>& scores, double alpha);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
  double auc = 0.0;              // trapezoid rule; ties grouped at one threshold
};

/// Threshold sweep over the distinct scores. Throws std::invalid_argument
/// unless both classes are present.
RocCurve roc_curve(const std::vector<bool>& labels, const std::vector<double>& scores);

/// patch_tpr^(1/k): the independence upper bound for detecting an image with
/// k indicators when each is spotted with probability patch_tpr.
double naive_image_tpr(double patch_tpr, int k);

struct EvalReport {
  ConfusionMatrix cm;
  ClassScores class_true;
  ClassScores class_false;
  double macro_f1 = 0.0;
  std::optional<double> auc;
  std::optional<RocCurve> roc;
};

/// Report over aligned label/prediction lists; scores, when given, add the
/// ROC curve and AUC.
EvalReport evaluate_run(const std::vector<bool>& ground_truth,
                        const std::vector<bool>& predictions,
                        const std::vector<double>& scores = {});

std::string report_to_json_text(const EvalReport& report);

struct RunSummary {
  std::vector<double> scores;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) deviation
  double moe = 0.0;
  double alpha = 0.05;
};

RunSummary summarize_runs(const std::vector<double>& scores, double alpha = 0.05);

/// Minimal standalone SVG of a ROC curve.
std::string roc_to_svg(const RocCurve& curve, const std::string& title);

}  // namespace markush
