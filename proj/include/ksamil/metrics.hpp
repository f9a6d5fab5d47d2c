#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ksa {

/// A metric that is not defined for the given labels (e.g. AUC with one class).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Area under the ROC curve as the normalised Mann-Whitney statistic; tied
/// positive/negative pairs count one half.
double auc(std::span<const double> scores, std::span<const int> labels);

struct ConfusionMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_undefined = false;  // no predicted positives; precision reported as 0
  bool recall_undefined = false;     // no actual positives; recall reported as 0
};

/// Threshold metrics; a score >= threshold predicts the positive class.
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = 0.5);

struct MetricsReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f_score = 0;
  double auc = 0;  // NaN when only one class is present
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  bool auc_defined = false;
};

MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct Summary {
  double mean = 0;
  double std = 0;     // sample standard deviation, 0 for a single value
  std::size_t n = 0;  // finite values used
};

/// Mean and sample standard deviation of the finite entries.
Summary summarize(std::span<const double> values);

}  // namespace ksa
