#include "markush/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace markush {

void ConfusionMatrix::add(bool ground_truth, bool predicted) {
  if (ground_truth)
    predicted ? ++tp : ++fn;
  else
    predicted ? ++fp : ++tn;
}

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

ClassScores scores_from(long long tp, long long fp, long long fn) {
  ClassScores s;
  s.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  s.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

}  // namespace

ClassScores class_scores_true(const ConfusionMatrix& cm) {
  return scores_from(cm.tp, cm.fp, cm.fn);
}

ClassScores class_scores_false(const ConfusionMatrix& cm) {
  // The false class is the positive class here, so the matrix roles swap.
  return scores_from(cm.tn, cm.fn, cm.fp);
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw std::invalid_argument("macro_f1: empty confusion matrix");
  return 0.5 * (class_scores_true(cm).f1 + class_scores_false(cm).f1);
}

bool aggregate_image(const std::vector<bool>& patch_labels) {
  if (patch_labels.empty()) throw std::invalid_argument("aggregate_image: no patches");
  return std::any_of(patch_labels.begin(), patch_labels.end(), [](bool b) { return b; });
}

namespace {

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction.
double incbeta_cf(double a, double b, double x) {
  constexpr double eps = 1e-15;
  constexpr double tiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * incbeta_cf(a, b, x) / a;
  return 1.0 - front * incbeta_cf(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student t with df degrees of freedom.
double student_t_cdf(double t, int df) {
  const double x = static_cast<double>(df) / (df + t * t);
  const double half_tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

}  // namespace

double student_t_critical(double alpha, int df) {
  if (df < 1) throw std::invalid_argument("student_t_critical: df must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("student_t_critical: alpha must be in (0, 1)");
  const double target = 1.0 - alpha / 2.0;

  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < target) hi *= 2.0;
  // Bisection to ~1e-12 interval width; plenty for the 1e-8 contract.
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double margin_of_error(const std::vector<double>& scores, double alpha) {
  const std::size_t n = scores.size();
  if (n < 2) throw std::invalid_argument("margin_of_error: need at least 2 scores");
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(n - 1));
  const double t = student_t_critical(alpha, static_cast<int>(n) - 1);
  return t * sigma / std::sqrt(static_cast<double>(n));
}

RocCurve roc_curve(const std::vector<bool>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size())
    throw std::invalid_argument("roc_curve: length mismatch");
  long long pos = 0, neg = 0;
  for (bool l : labels) l ? ++pos : ++neg;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_curve: both classes must be present");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  long long tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // All items sharing one score flip together.
    const double s = scores[order[i]];
    long long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      labels[order[i]] ? ++dtp : ++dfp;
      ++i;
    }
    const double fpr0 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr0 = static_cast<double>(tp) / static_cast<double>(pos);
    tp += dtp;
    fp += dfp;
    const double fpr1 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr1 = static_cast<double>(tp) / static_cast<double>(pos);
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) * 0.5;
    curve.points.push_back({fpr1, tpr1});
  }
  curve.auc = auc;
  return curve;
}

double naive_image_tpr(double patch_tpr, int k) {
  if (k < 1) throw std::invalid_argument("naive_image_tpr: k must be >= 1");
  if (!(patch_tpr >= 0.0 && patch_tpr <= 1.0))
    throw std::invalid_argument("naive_image_tpr: tpr must be in [0, 1]");
  return std::pow(patch_tpr, 1.0 / static_cast<double>(k));
}

EvalReport evaluate_run(const std::vector<bool>& ground_truth,
                        const std::vector<bool>& predictions,
                        const std::vector<double>& scores) {
  if (ground_truth.size() != predictions.size())
    throw std::invalid_argument("evaluate_run: length mismatch");
  if (!scores.empty() && scores.size() != ground_truth.size())
    throw std::invalid_argument("evaluate_run: score length mismatch");
  if (ground_truth.empty()) throw std::invalid_argument("evaluate_run: empty input");

  EvalReport report;
  for (std::size_t i = 0; i < ground_truth.size(); ++i)
    report.cm.add(ground_truth[i], predictions[i]);
  report.class_true = class_scores_true(report.cm);
  report.class_false = class_scores_false(report.cm);
  report.macro_f1 = macro_f1(report.cm);
  if (!scores.empty()) {
    bool both = report.cm.tp + report.cm.fn > 0 && report.cm.fp + report.cm.tn > 0;
    if (both) {
      report.roc = roc_curve(ground_truth, scores);
      report.auc = report.roc->auc;
    }
  }
  return report;
}

std::string report_to_json_text(const EvalReport& report) {
  nlohmann::json doc;
  doc["cm"] = {{"tp", report.cm.tp}, {"fn", report.cm.fn}, {"fp", report.cm.fp},
               {"tn", report.cm.tn}};
  auto class_json = [](const ClassScores& s) {
    return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  doc["per_class"] = nlohmann::json::array({class_json(report.class_true),
                                            class_json(report.class_false)});
  doc["macro_f1"] = report.macro_f1;
  if (report.auc)
    doc["auc"] = *report.auc;
  else
    doc["auc"] = nullptr;
  if (report.roc) {
    auto points = nlohmann::json::array();
    for (const auto& p : report.roc->points)
      points.push_back(nlohmann::json::array({p.fpr, p.tpr}));
    doc["roc"] = std::move(points);
  }
  return doc.dump(2) + "\n";
}

RunSummary summarize_runs(const std::vector<double>& scores, double alpha) {
  RunSummary s;
  s.scores = scores;
  s.alpha = alpha;
  const std::size_t n = scores.size();
  if (n < 2) throw std::invalid_argument("summarize_runs: need at least 2 runs");
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : scores) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  s.moe = margin_of_error(scores, alpha);
  return s;
}

std::string roc_to_svg(const RocCurve& curve, const std::string& title) {
  constexpr int size = 420;
  constexpr int margin = 40;
  constexpr int plot = size - 2 * margin;
  auto px = [&](double fpr) { return margin + fpr * plot; };
  auto py = [&](double tpr) { return size - margin - tpr * plot; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "  <rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot
      << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
      << py(1) << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  svg << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve.points) svg << px(p.fpr) << "," << py(p.tpr) << " ";
  svg << "\"/>\n";
  svg << "  <text x=\"" << size / 2 << "\" y=\"" << margin / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << title
      << " (AUC " << curve.auc << ")</text>\n";
  svg << "  <text x=\"" << size / 2 << "\" y=\"" << size - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">FPR</text>\n";
  svg << "  <text x=\"12\" y=\"" << size / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 12 "
      << size / 2 << ")\">TPR</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace markush
