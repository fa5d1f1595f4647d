#pragma once

#include <string>
#include <utility>
#include <vector>

#include "awfnet/errors.hpp"

namespace awfnet {

/// Evaluation-time predictions: probability rows (each summing to 1) plus
/// integer labels. positive_class selects the clinical "case" class for
/// binary metrics.
struct PredictionSet {
  std::vector<double> probs;  // N x C, row-major
  int num_classes = 0;
  std::vector<int> labels;
  int positive_class = 1;

  int n() const { return static_cast<int>(labels.size()); }
  void validate() const;
};

/// Screening + trustworthiness metrics. Zero-denominator cells yield 0 and
/// set the degenerate flag instead of NaN.
struct MetricReport {
  double acc = 0, precision = 0, sensitivity = 0, f1 = 0, specificity = 0,
         b_acc = 0;
  double auc = 0, ece = 0, mce = 0;
  int bin_count = 15;
  int num_classes = 0;
  std::vector<long> confusion;  // C x C, confusion[label * C + prediction]
  bool degenerate = false;
};

/// Argmax decision rule (ties broken toward the lowest class index);
/// fills everything except auc/ece/mce.
MetricReport classification_metrics(const PredictionSet& p);

/// Binary: Mann-Whitney rank statistic with tie correction over the
/// positive-class scores. Multi-class: macro one-vs-rest average.
double auc(const PredictionSet& p);

/// (ECE, MCE) over equal-width confidence bins spanning (0, 1].
std::pair<double, double> calibration_errors(const PredictionSet& p,
                                             int bins = 15);

/// Full report: classification metrics plus AUC and calibration errors.
MetricReport compute_metrics(const PredictionSet& p, int bins = 15);

/// Column names / values shared by metrics.csv and the ablation table.
const std::vector<std::string>& metric_column_names();
std::vector<double> metric_column_values(const MetricReport& r);

}  // namespace awfnet
