#include "zonescan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "zonescan/error.hpp"

namespace zonescan {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : cells) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < n; ++i) t += at(i, i);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int r) const {
  std::int64_t t = 0;
  for (int c = 0; c < n; ++c) t += at(r, c);
  return t;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t t = 0;
  for (int r = 0; r < n; ++r) t += at(r, c);
  return t;
}

ConfusionMatrix confusion(const std::vector<int>& preds,
                          const std::vector<int>& truths, int num_classes) {
  if (preds.size() != truths.size())
    throw ValidationError("confusion: preds and truths differ in length");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], t = truths[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
      throw ValidationError("confusion: class id outside 0.." +
                            std::to_string(num_classes - 1));
    ++cm.at(t, p);
  }
  return cm;
}

ClassMetrics precision_recall(const ConfusionMatrix& cm) {
  ClassMetrics out;
  out.per_class.resize(std::size_t(cm.n));

  double macro_p = 0, macro_r = 0, macro_f = 0;
  int n_p = 0, n_r = 0, n_f = 0;
  for (int c = 0; c < cm.n; ++c) {
    auto& m = out.per_class[std::size_t(c)];
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t truth = cm.row_sum(c);
    const std::int64_t predicted = cm.col_sum(c);
    m.support = truth;
    if (truth > 0) {
      m.recall = double(tp) / double(truth);
      m.recall_defined = true;
      macro_r += m.recall;
      ++n_r;
    }
    if (predicted > 0) {
      m.precision = double(tp) / double(predicted);
      m.precision_defined = true;
      macro_p += m.precision;
      ++n_p;
    }
    if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
      m.f1_defined = true;
      macro_f += m.f1;
      ++n_f;
    }
  }
  out.macro_precision = n_p ? macro_p / n_p : 0.0;
  out.macro_recall = n_r ? macro_r / n_r : 0.0;
  out.macro_f1 = n_f ? macro_f / n_f : 0.0;

  const std::int64_t total = cm.total();
  if (total > 0) {
    // micro-averaged precision and recall both reduce to trace/total
    out.micro_precision = double(cm.trace()) / double(total);
    out.micro_recall = double(cm.trace()) / double(total);
    out.accuracy = double(cm.trace()) / double(total);
  }
  return out;
}

double topk_accuracy(const std::vector<std::vector<double>>& probs,
                     const std::vector<int>& truths, int k) {
  if (probs.size() != truths.size())
    throw ValidationError("topk_accuracy: probs and truths differ in length");
  if (probs.empty()) return 0.0;
  const int C = int(probs[0].size());
  if (k < 1 || k > C) throw ParamError("topk_accuracy: k outside 1..classes");

  std::size_t hits = 0;
  std::vector<int> idx(C, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (int(probs[i].size()) != C)
      throw ShapeError("topk_accuracy: ragged probability rows");
    std::iota(idx.begin(), idx.end(), 0);
    // ties break toward the lower class id
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](int a, int b) {
                        if (probs[i][std::size_t(a)] != probs[i][std::size_t(b)])
                          return probs[i][std::size_t(a)] > probs[i][std::size_t(b)];
                        return a < b;
                      });
    for (int j = 0; j < k; ++j)
      if (idx[std::size_t(j)] == truths[i]) {
        ++hits;
        break;
      }
  }
  return double(hits) / double(probs.size());
}

RocCurve roc_points(const std::vector<double>& scores,
                    const std::vector<int>& truths, int positive_class) {
  if (scores.size() != truths.size())
    throw ValidationError("roc_points: scores and truths differ in length");

  std::int64_t P = 0, N = 0;
  for (int t : truths) (t == positive_class ? P : N)++;
  if (P == 0 || N == 0)
    throw ValidationError("roc_points: class " + std::to_string(positive_class) +
                          " needs at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve out;
  out.thresholds.push_back(std::numeric_limits<double>::infinity());
  out.fpr.push_back(0.0);
  out.tpr.push_back(0.0);

  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (truths[order[i]] == positive_class ? tp : fp)++;
      ++i;
    }
    out.thresholds.push_back(t);
    out.fpr.push_back(double(fp) / double(N));
    out.tpr.push_back(double(tp) / double(P));
  }
  // the sweep always ends at (1,1) once every sample is predicted positive

  double auc = 0.0;
  for (std::size_t j = 1; j < out.fpr.size(); ++j)
    auc += (out.fpr[j] - out.fpr[j - 1]) * (out.tpr[j] + out.tpr[j - 1]) / 2.0;
  out.auc = auc;
  return out;
}

}  // namespace zonescan
