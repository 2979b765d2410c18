#include "zonescan/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zonescan/dataset.hpp"
#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

namespace {

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "actual";
  for (int c = 0; c < cm.n; ++c) out << ',' << class_name(c);
  out << "\n";
  for (int r = 0; r < cm.n; ++r) {
    out << class_name(r);
    for (int c = 0; c < cm.n; ++c) out << ',' << cm.at(r, c);
    out << "\n";
  }
  return out.str();
}

std::string metrics_csv(const ClassMetrics& m) {
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  auto cell = [](bool defined, double v) {
    return defined ? fmt_g(v) : std::string("n/a");
  };
  std::int64_t total = 0;
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& pc = m.per_class[c];
    out << class_name(int(c)) << ',' << cell(pc.precision_defined, pc.precision)
        << ',' << cell(pc.recall_defined, pc.recall) << ','
        << cell(pc.f1_defined, pc.f1) << ',' << pc.support << "\n";
    total += pc.support;
  }
  out << "macro," << fmt_g(m.macro_precision) << ',' << fmt_g(m.macro_recall)
      << ',' << fmt_g(m.macro_f1) << ',' << total << "\n";
  return out.str();
}

}  // namespace

std::string render_curves_svg(const TrainingLog& log) {
  const int W = 880, H = 560;
  const int ml = 70, mr = 70, mt = 40, mb = 50;
  const int pw = W - ml - mr, ph = H - mt - mb;
  const std::size_t n = log.rows.size();

  double max_loss = 0.0;
  for (const auto& r : log.rows) max_loss = std::max(max_loss, r.val_loss);
  if (max_loss <= 0.0) max_loss = 1.0;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">validation loss and "
       "accuracy per epoch</text>\n";

  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
    << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
    << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml + pw << "\" y1=\"" << mt << "\" x2=\"" << ml + pw
    << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<text x=\"20\" y=\"" << mt + ph / 2
    << "\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 20 " << mt + ph / 2 << ")\">loss</text>\n";
  s << "<text x=\"" << W - 16 << "\" y=\"" << mt + ph / 2
    << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(90 "
    << W - 16 << ' ' << mt + ph / 2 << ")\">accuracy</text>\n";
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\">epoch</text>\n";

  auto x_of = [&](std::size_t i) {
    return n <= 1 ? double(ml)
                  : ml + double(i) * double(pw) / double(n - 1);
  };

  std::ostringstream loss_pts, acc_pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = x_of(i);
    const double ly = mt + ph - log.rows[i].val_loss / max_loss * ph;
    const double ay = mt + ph - log.rows[i].val_accuracy * ph;
    loss_pts << f2(lx) << ',' << f2(ly) << ' ';
    acc_pts << f2(lx) << ',' << f2(ay) << ' ';
  }
  s << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" "
       "points=\"" << loss_pts.str() << "\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
       "points=\"" << acc_pts.str() << "\"/>\n";
  s << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16
    << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">val "
       "loss (max " << fmt_g(max_loss, 4) << ")</text>\n";
  s << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 32
    << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">val "
       "accuracy</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string render_pr_bars_svg(const ClassMetrics& m) {
  const int n = int(m.per_class.size());
  const int bar_w = 9, gap = 4, group_gap = 8;
  const int ml = 60, mr = 20, mt = 40, mb = 90;
  const int ph = 360;
  const int W = ml + mr + n * (2 * bar_w + gap + group_gap);
  const int H = mt + ph + mb;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">precision and recall per "
       "class</text>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
    << mt + ph << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << W - mr
    << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";

  for (int c = 0; c < n; ++c) {
    const auto& pc = m.per_class[std::size_t(c)];
    const int x0 = ml + group_gap / 2 + c * (2 * bar_w + gap + group_gap);
    const double hp = pc.precision_defined ? pc.precision * ph : 0.0;
    const double hr = pc.recall_defined ? pc.recall * ph : 0.0;
    s << "<rect class=\"bar\" x=\"" << x0 << "\" y=\"" << f2(mt + ph - hp)
      << "\" width=\"" << bar_w << "\" height=\"" << f2(hp)
      << "\" fill=\"#1f77b4\"/>\n";
    s << "<rect class=\"bar\" x=\"" << x0 + bar_w + gap << "\" y=\""
      << f2(mt + ph - hr) << "\" width=\"" << bar_w << "\" height=\"" << f2(hr)
      << "\" fill=\"#ff7f0e\"/>\n";
    s << "<text x=\"" << x0 + bar_w << "\" y=\"" << mt + ph + 8
      << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\" "
         "transform=\"rotate(-60 " << x0 + bar_w << ' ' << mt + ph + 8 << ")\">"
      << class_name(c) << "</text>\n";
  }
  s << "<text x=\"" << ml << "\" y=\"" << H - 8
    << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">"
       "precision</text>\n";
  s << "<text x=\"" << ml + 100 << "\" y=\"" << H - 8
    << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#ff7f0e\">"
       "recall</text>\n";
  s << "</svg>\n";
  return s.str();
}

void render_reports(const TrainingLog& log, const EvalArtifacts& artifacts,
                    const std::string& out_dir) {
  ensure_dir(out_dir);
  atomic_write_file(path_join(out_dir, "confusion_matrix.csv"),
                    confusion_csv(artifacts.cm));
  atomic_write_file(path_join(out_dir, "metrics.csv"),
                    metrics_csv(artifacts.metrics));

  {
    std::ostringstream out;
    out << "k,accuracy\n";
    out << "1," << fmt_g(artifacts.top1) << "\n";
    out << "5," << fmt_g(artifacts.top5) << "\n";
    atomic_write_file(path_join(out_dir, "topk.csv"), out.str());
  }

  for (std::size_t i = 0; i < artifacts.roc_classes.size(); ++i) {
    const auto& roc = artifacts.rocs[i];
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    for (std::size_t j = 0; j < roc.thresholds.size(); ++j)
      out << fmt_g(roc.thresholds[j]) << ',' << fmt_g(roc.fpr[j]) << ','
          << fmt_g(roc.tpr[j]) << "\n";
    atomic_write_file(
        path_join(out_dir, "roc_class" +
                               std::to_string(artifacts.roc_classes[i]) + ".csv"),
        out.str());
  }

  if (!log.rows.empty())
    atomic_write_file(path_join(out_dir, "curves.svg"), render_curves_svg(log));
  atomic_write_file(path_join(out_dir, "pr_bars.svg"),
                    render_pr_bars_svg(artifacts.metrics));
}

ConfusionMatrix read_confusion_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("empty confusion matrix " + path);
  const auto header = split_csv_line(trim(line));
  const int n = int(header.size()) - 1;
  if (n < 1 || header[0] != "actual")
    throw SchemaError("confusion matrix header mismatch in " + path);

  ConfusionMatrix cm(n);
  int r = 0;
  while (std::getline(f, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (r >= n) throw SchemaError("too many rows in " + path);
    const auto cols = split_csv_line(t);
    if (int(cols.size()) != n + 1)
      throw SchemaError("ragged confusion matrix row in " + path);
    for (int c = 0; c < n; ++c)
      cm.at(r, c) = parse_int(cols[std::size_t(c) + 1], "confusion cell");
    ++r;
  }
  if (r != n) throw SchemaError("missing rows in " + path);
  return cm;
}

ClassMetrics read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("empty metrics file " + path);
  if (trim(line) != "class,precision,recall,f1,support")
    throw SchemaError("metrics header mismatch in " + path);

  ClassMetrics m;
  while (std::getline(f, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split_csv_line(t);
    if (cols.size() != 5) throw SchemaError("ragged metrics row in " + path);
    if (cols[0] == "macro") {
      m.macro_precision = parse_double(cols[1], "macro precision");
      m.macro_recall = parse_double(cols[2], "macro recall");
      m.macro_f1 = parse_double(cols[3], "macro f1");
      continue;
    }
    ClassMetric pc;
    if (cols[1] != "n/a") {
      pc.precision = parse_double(cols[1], "precision");
      pc.precision_defined = true;
    }
    if (cols[2] != "n/a") {
      pc.recall = parse_double(cols[2], "recall");
      pc.recall_defined = true;
    }
    if (cols[3] != "n/a") {
      pc.f1 = parse_double(cols[3], "f1");
      pc.f1_defined = true;
    }
    pc.support = parse_int(cols[4], "support");
    m.per_class.push_back(pc);
  }
  return m;
}

}  // namespace zonescan
