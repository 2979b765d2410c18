#pragma once

#include <string>
#include <vector>

#include "zonescan/metrics.hpp"
#include "zonescan/training_log.hpp"

namespace zonescan {

struct EvalArtifacts {
  ConfusionMatrix cm;
  ClassMetrics metrics;
  double top1 = 0, top5 = 0;
  std::vector<int> roc_classes;   // class ids with a defined ROC
  std::vector<RocCurve> rocs;     // parallel to roc_classes
};

// Writes confusion_matrix.csv, metrics.csv, topk.csv, roc_class<k>.csv,
// curves.svg and pr_bars.svg. Output is byte-stable for identical inputs.
void render_reports(const TrainingLog& log, const EvalArtifacts& artifacts,
                    const std::string& out_dir);

// CSV readers for re-rendering from saved artifacts.
ConfusionMatrix read_confusion_csv(const std::string& path);
ClassMetrics read_metrics_csv(const std::string& path);

std::string render_curves_svg(const TrainingLog& log);
std::string render_pr_bars_svg(const ClassMetrics& metrics);

}  // namespace zonescan
