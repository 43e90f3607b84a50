#include "ibkd/pipeline.hpp"

#include <cmath>

#include "ibkd/error.hpp"

namespace ibkd::pipeline {

Embedder student_embedder(const encoder::StudentModel& model) {
  return [&model](std::span<const std::string>, const Matrix& x) { return encoder::embed(model, x); };
}

Embedder teacher_embedder(const encoder::TeacherModel& teacher) {
  return [&teacher](std::span<const std::string> ids, const Matrix& x) { return teacher.embed(ids, x); };
}

DistillInputs distill_inputs(const dataio::Dataset& ds) {
  DistillInputs out;
  out.ids = ds.corpus_ids;
  out.ids.insert(out.ids.end(), ds.anchor_ids.begin(), ds.anchor_ids.end());
  const std::vector<Matrix> blocks{ds.corpus, ds.anchors};
  out.inputs = linalg::vstack(blocks);
  return out;
}

encoder::MLPSpec student_spec(const DistillConfig& cfg, const dataio::Dataset& ds) {
  encoder::MLPSpec spec{cfg.student_dims};
  spec.validate();
  if (spec.d_in() != ds.input_dim()) {
    fail(ErrorKind::Config, "student_dims starts at " + std::to_string(spec.d_in()) + " but the data has " +
                                std::to_string(ds.input_dim()) + " input features");
  }
  return spec;
}

void check_compatible(const encoder::StudentModel& model, const dataio::Dataset& ds) {
  if (model.spec.d_in() != ds.input_dim()) {
    fail(ErrorKind::Config, "checkpoint expects " + std::to_string(model.spec.d_in()) + " input features, data has " +
                                std::to_string(ds.input_dim()));
  }
}

eval::MetricReport evaluate_retrieval(const Embedder& embed, const dataio::Dataset& ds, std::size_t k,
                                      eval::Score score, std::vector<eval::RankedResult>* rankings) {
  if (k < 1) fail(ErrorKind::Config, "k must be at least 1");
  const Matrix q = embed(ds.query_ids, ds.queries);
  const Matrix d = embed(ds.corpus_ids, ds.corpus);
  auto results = eval::exact_retrieve(q, d, k, score);
  const auto rel = ds.relevance_index();
  eval::MetricReport r;
  r.eval_set = "retrieval";
  r.dim = q.cols();
  r.metrics["mrr@" + std::to_string(k)] = eval::mrr_at_k(results, rel, k);
  r.metrics["recall@" + std::to_string(k)] = eval::recall_at_k(results, rel, k);
  r.validate();
  if (rankings) *rankings = std::move(results);
  return r;
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(linalg::dot(a, a)), nb = std::sqrt(linalg::dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return linalg::dot(a, b) / (na * nb);
}

Matrix normalize_rows(Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    const double n = std::sqrt(linalg::dot(r, r));
    if (n > 0.0)
      for (double& v : r) v /= n;
  }
  return m;
}

}  // namespace

eval::MetricReport evaluate_sts(const Embedder& embed, const dataio::Dataset& ds) {
  if (ds.sts.empty()) fail(ErrorKind::Data, "dataset has no similarity pairs");
  std::vector<std::string> a_ids, b_ids;
  std::vector<double> gold;
  for (const auto& p : ds.sts) {
    a_ids.push_back(p.a);
    b_ids.push_back(p.b);
    gold.push_back(p.gold);
  }
  const Matrix ea = embed(a_ids, ds.inputs_for(a_ids));
  const Matrix eb = embed(b_ids, ds.inputs_for(b_ids));
  std::vector<double> pred(gold.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = cosine(ea.row(i), eb.row(i));
  eval::MetricReport r;
  r.eval_set = "sts";
  r.dim = ea.cols();
  r.metrics["spearman"] = eval::spearman(pred, gold);
  r.metrics["pairs"] = static_cast<double>(gold.size());
  r.validate();
  return r;
}

Diagnosis diagnose(const Embedder& embed, const dataio::Dataset& ds) {
  const auto& sup = ds.supervised;
  const Matrix corpus = embed(ds.corpus_ids, ds.corpus);
  const Matrix a = normalize_rows(embed(sup.anchor_ids, sup.anchors));
  const Matrix p = normalize_rows(embed(sup.positive_ids, sup.positives));
  Diagnosis out;
  out.covariance = eval::covariance_matrix(corpus);
  const auto mass = eval::offdiag_mass(out.covariance);
  auto& r = out.report;
  r.eval_set = "diagnose";
  r.dim = corpus.cols();
  r.metrics["alignment"] = eval::alignment(a, p);
  r.metrics["uniformity"] = eval::uniformity(normalize_rows(corpus));
  r.metrics["offdiag_mass"] = mass.value;
  for (std::size_t d : mass.zero_variance) r.warnings.push_back("dimension " + std::to_string(d) + " has zero variance");
  r.validate();
  return out;
}

PipelineResult run_pipeline(const DistillConfig& cfg, const dataio::Dataset& ds) {
  const auto spec = student_spec(cfg, ds);
  const encoder::TeacherModel teacher(ds.teacher);
  const auto in = distill_inputs(ds);
  auto distilled = trainer::run_distill_stage(cfg, teacher, encoder::StudentModel::init(spec, cfg.seed), in.ids, in.inputs);
  auto finetuned = trainer::run_finetune_stage(cfg, distilled.student, ds.supervised);
  return {std::move(distilled.student), std::move(finetuned.student), std::move(distilled.history),
          std::move(finetuned.history)};
}

}  // namespace ibkd::pipeline
