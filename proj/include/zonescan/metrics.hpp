#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zonescan {

// Rows = actual class, columns = predicted class.
struct ConfusionMatrix {
  int n = 0;
  std::vector<std::int64_t> cells;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n_) : n(n_), cells(std::size_t(n_) * n_, 0) {}

  std::int64_t& at(int truth, int pred) { return cells[std::size_t(truth) * n + pred]; }
  std::int64_t at(int truth, int pred) const { return cells[std::size_t(truth) * n + pred]; }

  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(int r) const;
  std::int64_t col_sum(int c) const;
};

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& truths, int num_classes);

struct ClassMetric {
  double precision = 0, recall = 0, f1 = 0;
  std::int64_t support = 0;
  bool precision_defined = false, recall_defined = false, f1_defined = false;
};

// Zero-denominator rates stay undefined and are excluded from the macro
// averages rather than coerced to 0.
struct ClassMetrics {
  std::vector<ClassMetric> per_class;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double micro_precision = 0, micro_recall = 0, accuracy = 0;
};

ClassMetrics precision_recall(const ConfusionMatrix& cm);

// Fraction of rows whose truth is among the k highest probabilities; ties
// resolved toward the lower class id.
double topk_accuracy(const std::vector<std::vector<double>>& probs,
                     const std::vector<int>& truths, int k);

struct RocCurve {
  std::vector<double> thresholds;  // +inf first, then distinct scores descending
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0;
};

// One-vs-rest threshold sweep for class c; needs at least one positive and
// one negative.
RocCurve roc_points(const std::vector<double>& scores,
                    const std::vector<int>& truths, int positive_class);

}  // namespace zonescan
