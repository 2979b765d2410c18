#pragma once

#include <string>
#include <vector>

namespace zonescan {

struct TrainEpochRow {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double seconds = 0;  // wall time, the one non-deterministic column
};

struct TrainingLog {
  std::vector<TrainEpochRow> rows;
};

// CSV: epoch,train_loss,val_loss,val_accuracy,seconds
void write_training_log(const TrainingLog& log, const std::string& path);
TrainingLog read_training_log(const std::string& path);

}  // namespace zonescan
