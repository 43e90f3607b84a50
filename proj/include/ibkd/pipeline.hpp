#pragma once

// Glue between the dataset, the trainer and the metrics. The CLI and the
// acceptance runs both go through these functions so their numbers agree.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ibkd/config.hpp"
#include "ibkd/dataio.hpp"
#include "ibkd/encoder.hpp"
#include "ibkd/evalsuite.hpp"
#include "ibkd/trainer.hpp"

namespace ibkd::pipeline {

/// Maps (ids, input rows) to embedding rows.
using Embedder = std::function<Matrix(std::span<const std::string>, const Matrix&)>;

Embedder student_embedder(const encoder::StudentModel& model);
Embedder teacher_embedder(const encoder::TeacherModel& teacher);

/// Unlabeled distillation inputs: the corpus followed by the training anchors.
/// Held-out queries are never included.
struct DistillInputs {
  std::vector<std::string> ids;
  Matrix inputs;
};
DistillInputs distill_inputs(const dataio::Dataset& ds);

/// Student architecture for cfg; the first width must equal the data's input
/// dimension.
encoder::MLPSpec student_spec(const DistillConfig& cfg, const dataio::Dataset& ds);

/// Throws a config error when the model cannot consume the dataset's inputs.
void check_compatible(const encoder::StudentModel& model, const dataio::Dataset& ds);

/// Held-out queries against the corpus: mrr@k and recall@k.
eval::MetricReport evaluate_retrieval(const Embedder& embed, const dataio::Dataset& ds, std::size_t k,
                                      eval::Score score, std::vector<eval::RankedResult>* rankings = nullptr);

/// Spearman between embedding cosine and the gold similarity of every pair.
eval::MetricReport evaluate_sts(const Embedder& embed, const dataio::Dataset& ds);

struct Diagnosis {
  eval::MetricReport report;
  Matrix covariance;
};

/// Alignment over (anchor, positive) pairs and uniformity over the corpus,
/// both on L2-normalized embeddings; offdiag_mass of the raw corpus
/// embedding covariance.
Diagnosis diagnose(const Embedder& embed, const dataio::Dataset& ds);

struct PipelineResult {
  encoder::StudentModel distilled;
  encoder::StudentModel finetuned;
  trainer::TrainHistory distill_history;
  trainer::TrainHistory finetune_history;
};

/// Fresh student → distill → finetune.
PipelineResult run_pipeline(const DistillConfig& cfg, const dataio::Dataset& ds);

}  // namespace ibkd::pipeline
