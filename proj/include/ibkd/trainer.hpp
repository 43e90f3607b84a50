#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ibkd/config.hpp"
#include "ibkd/dataio.hpp"
#include "ibkd/encoder.hpp"
#include "ibkd/error.hpp"

namespace ibkd::trainer {

/// Adam moments for a parameter list; constants are the usual defaults.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
  double beta_m = 0.9;
  double beta_v = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Moments are created on the first call;
/// afterwards their shapes must match the parameters.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;
  double total = 0.0;
  double infonce = 0.0;
  double hsic = 0.0;
  double wall_ms = 0.0;
  std::size_t batches = 0;
  std::map<std::string, double> snapshot;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  void write_csv(std::ostream& os) const;
};

/// Raised when a batch loss is non-finite; carries the partial history.
class TrainingAborted : public Error {
 public:
  TrainingAborted(std::size_t epoch, std::size_t batch, TrainHistory history);
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  const TrainHistory& history() const { return history_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  TrainHistory history_;
};

/// Optional per-epoch evaluation hook; its metrics land in EpochRecord::snapshot.
using SnapshotFn = std::function<std::map<std::string, double>(const encoder::StudentModel&, std::size_t epoch)>;

struct StageResult {
  encoder::StudentModel student;
  TrainHistory history;
};

/// Distillation stage: per shuffled batch, S = student(x), T = teacher(x),
/// loss = InfoNCE(S, T) + β₁·HSIC(x, S), Adam on the network and the
/// alignment head.
StageResult run_distill_stage(const DistillConfig& cfg, const encoder::TeacherModel& teacher,
                              encoder::StudentModel student, std::span<const std::string> ids, const Matrix& inputs,
                              const SnapshotFn& snapshot = {});

/// Fine-tuning stage: supervised InfoNCE over (anchor, positive, K hard
/// negatives) + β₂·HSIC(x_anchor, s_anchor). Drops the alignment head and,
/// when cfg.reduce_to is set, trains through a projection to that width.
StageResult run_finetune_stage(const DistillConfig& cfg, encoder::StudentModel student,
                               const dataio::SupervisedSet& data, const SnapshotFn& snapshot = {});

}  // namespace ibkd::trainer
