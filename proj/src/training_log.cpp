#include "zonescan/training_log.hpp"

#include <fstream>
#include <sstream>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

void write_training_log(const TrainingLog& log, const std::string& path) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_accuracy,seconds\n";
  for (const auto& r : log.rows)
    out << r.epoch << ',' << fmt_g(r.train_loss) << ',' << fmt_g(r.val_loss)
        << ',' << fmt_g(r.val_accuracy) << ',' << fmt_g(r.seconds, 6) << "\n";
  atomic_write_file(path, out.str());
}

TrainingLog read_training_log(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open training log " + path);
  std::string line;
  if (!std::getline(f, line)) throw SchemaError("empty training log " + path);
  if (trim(line) != "epoch,train_loss,val_loss,val_accuracy,seconds")
    throw SchemaError("training log header mismatch in " + path);

  TrainingLog log;
  while (std::getline(f, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cols = split_csv_line(t);
    if (cols.size() != 5)
      throw SchemaError("expected 5 columns in training log row: " + t);
    TrainEpochRow r;
    r.epoch = parse_int(cols[0], "epoch");
    r.train_loss = parse_double(cols[1], "train_loss");
    r.val_loss = parse_double(cols[2], "val_loss");
    r.val_accuracy = parse_double(cols[3], "val_accuracy");
    r.seconds = parse_double(cols[4], "seconds");
    log.rows.push_back(r);
  }
  return log;
}

}  // namespace zonescan
