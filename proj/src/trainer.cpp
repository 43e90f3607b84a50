#include "ibkd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>

#include "ibkd/error.hpp"
#include "ibkd/objectives.hpp"

namespace ibkd::trainer {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& st, double lr) {
  if (params.size() != grads.size()) fail(ErrorKind::State, "adam_step: parameter and gradient counts differ");
  if (st.m.empty() && st.step == 0) {
    for (const Matrix* p : params) {
      st.m.emplace_back(p->rows(), p->cols());
      st.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (st.m.size() != params.size()) fail(ErrorKind::State, "adam_step: optimizer state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols() || st.m[i].rows() != g.rows() ||
        st.m[i].cols() != g.cols()) {
      fail(ErrorKind::State, "adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta_m, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta_v, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data();
    auto& m = st.m[i].data();
    auto& v = st.v[i].data();
    const auto& g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = st.beta_m * m[j] + (1.0 - st.beta_m) * g[j];
      v[j] = st.beta_v * v[j] + (1.0 - st.beta_v) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void TrainHistory::write_csv(std::ostream& os) const {
  os << "epoch,total,infonce,hsic,wall_ms\n";
  os << std::setprecision(17);
  for (const auto& r : epochs) os << r.epoch << ',' << r.total << ',' << r.infonce << ',' << r.hsic << ',' << r.wall_ms << '\n';
}

TrainingAborted::TrainingAborted(std::size_t epoch, std::size_t batch, TrainHistory history)
    : Error(ErrorKind::Training, "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch) + "; training aborted"),
      epoch_(epoch),
      batch_(batch),
      history_(std::move(history)) {}

namespace {

using Clock = std::chrono::steady_clock;

// Contiguous batches over a permutation; a trailing batch smaller than 2 is
// dropped.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += linalg::frobenius_sq(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.data()) v *= s;
  }
}

// Gradients in StudentModel::parameters() order, minus any proj/align slots.
std::vector<Matrix> layer_grads(encoder::Gradients&& g) {
  std::vector<Matrix> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    out.push_back(std::move(g.w[l]));
    out.push_back(std::move(g.b[l]));
  }
  return out;
}

struct EpochAccumulator {
  double total = 0.0, infonce = 0.0, hsic = 0.0;
  std::size_t batches = 0;
  void add(const objectives::LossValue& lv) {
    total += lv.total;
    infonce += lv.parts.at("infonce");
    hsic += lv.parts.at("hsic");
    ++batches;
  }
  EpochRecord finish(std::size_t epoch, Clock::time_point start) const {
    EpochRecord r;
    const double n = static_cast<double>(std::max<std::size_t>(batches, 1));
    r.epoch = epoch;
    r.total = total / n;
    r.infonce = infonce / n;
    r.hsic = hsic / n;
    r.batches = batches;
    r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return r;
  }
};

}  // namespace

StageResult run_distill_stage(const DistillConfig& cfg, const encoder::TeacherModel& teacher,
                              encoder::StudentModel student, std::span<const std::string> ids, const Matrix& inputs,
                              const SnapshotFn& snapshot) {
  cfg.validate();
  if (ids.size() != inputs.rows()) fail(ErrorKind::Pairing, "distill: id count does not match input rows");
  if (inputs.cols() != student.spec.d_in()) {
    fail(ErrorKind::Config, "distill: inputs have " + std::to_string(inputs.cols()) + " features, student expects " +
                                std::to_string(student.spec.d_in()));
  }
  if (inputs.rows() < cfg.batch_size) {
    fail(ErrorKind::Config, "distill: corpus of " + std::to_string(inputs.rows()) + " rows is smaller than batch_size " +
                                std::to_string(cfg.batch_size));
  }
  StageResult result{std::move(student), {}};
  if (cfg.epochs_distill == 0) return result;

  encoder::StudentModel& model = result.student;
  if (model.proj) fail(ErrorKind::Config, "distill: student already carries a projection head");
  if (!model.align) model.attach_alignment(teacher.dim());
  model.align->check(model.spec.d_out(), teacher.dim());

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(inputs.rows());
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;
  const std::vector<std::string> all_ids(ids.begin(), ids.end());

  for (std::size_t epoch = 1; epoch <= cfg.epochs_distill; ++epoch) {
    const auto start = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochAccumulator acc;
    const auto batches = make_batches(order, cfg.batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const Matrix x = linalg::gather_rows(inputs, idx);
      std::vector<std::string> batch_ids;
      batch_ids.reserve(idx.size());
      for (std::size_t i : idx) batch_ids.push_back(all_ids[i]);
      const Matrix t = teacher.embed(batch_ids, x);

      auto fwd = encoder::forward(model, x);
      const auto abort = [&] {
        result.history.epochs.push_back(acc.finish(epoch, start));
        throw TrainingAborted(epoch, b, std::move(result.history));
      };
      if (!linalg::all_finite(fwd.output)) abort();
      auto eval = objectives::loss_distill_stage_grads(fwd.output, t, x, *model.align, cfg);
      if (!std::isfinite(eval.loss.total)) abort();
      auto grads = layer_grads(encoder::backward(model, fwd.cache, eval.grad_s));
      grads.push_back(std::move(eval.grad_w));
      clip_global_norm(grads, cfg.grad_clip);
      auto params = model.parameters();
      adam_step(params, grads, adam, cfg.lr_distill);
      acc.add(eval.loss);
    }
    auto rec = acc.finish(epoch, start);
    if (snapshot) rec.snapshot = snapshot(model, epoch);
    result.history.epochs.push_back(std::move(rec));
  }
  return result;
}

StageResult run_finetune_stage(const DistillConfig& cfg, encoder::StudentModel student,
                               const dataio::SupervisedSet& data, const SnapshotFn& snapshot) {
  cfg.validate();
  if (data.size() == 0) fail(ErrorKind::Data, "finetune: supervised set is empty");
  if (data.anchors.cols() != student.spec.d_in()) {
    fail(ErrorKind::Config, "finetune: instances have " + std::to_string(data.anchors.cols()) +
                                " features, student expects " + std::to_string(student.spec.d_in()));
  }
  StageResult result{std::move(student), {}};
  if (cfg.epochs_finetune == 0) return result;

  const dataio::SupervisedSet set = data.with_negatives(cfg.hard_negatives_K);
  const std::size_t K = set.K;
  encoder::StudentModel& model = result.student;
  model.align.reset();
  if (cfg.reduce_to) {
    if (!model.proj) model.attach_projection(*cfg.reduce_to, cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    if (model.proj->rows() != *cfg.reduce_to) fail(ErrorKind::Config, "finetune: existing projection width differs from reduce_to");
  }

  std::mt19937_64 rng(cfg.seed + 1);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;

  for (std::size_t epoch = 1; epoch <= cfg.epochs_finetune; ++epoch) {
    const auto start = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochAccumulator acc;
    const auto batches = make_batches(order, cfg.batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const dataio::SupervisedSet batch = set.subset(batches[b]);
      const std::size_t l = batch.size();
      const std::vector<Matrix> blocks{batch.anchors, batch.positives, batch.negatives};
      const Matrix stacked = linalg::vstack(blocks);
      auto fwd = encoder::forward(model, stacked);
      const Matrix emb = model.proj ? encoder::project(*model.proj, fwd.output) : fwd.output;

      std::vector<std::size_t> ia(l), ip(l), in(l * K);
      std::iota(ia.begin(), ia.end(), 0);
      std::iota(ip.begin(), ip.end(), l);
      std::iota(in.begin(), in.end(), 2 * l);
      const Matrix ea = linalg::gather_rows(emb, ia);
      const Matrix ep = linalg::gather_rows(emb, ip);
      Matrix en = K ? linalg::gather_rows(emb, in) : Matrix(0, emb.cols());

      const auto abort = [&] {
        result.history.epochs.push_back(acc.finish(epoch, start));
        throw TrainingAborted(epoch, b, std::move(result.history));
      };
      if (!linalg::all_finite(emb)) abort();
      auto eval = objectives::loss_finetune_stage_grads(ea, ep, en, K, batch.anchors, cfg);
      if (!std::isfinite(eval.loss.total)) abort();
      const std::vector<Matrix> gblocks{eval.grad_anchors, eval.grad_positives, eval.grad_negatives};
      Matrix g_emb = linalg::vstack(gblocks);
      Matrix g_out = g_emb;
      Matrix g_proj;
      if (model.proj) {
        g_proj = linalg::matmul_tn(g_emb, fwd.output);  // d'×d
        g_out = linalg::matmul(g_emb, *model.proj);     // n×d
      }
      auto grads = layer_grads(encoder::backward(model, fwd.cache, g_out));
      if (model.proj) grads.push_back(std::move(g_proj));
      clip_global_norm(grads, cfg.grad_clip);
      auto params = model.parameters();
      adam_step(params, grads, adam, cfg.lr_finetune);
      acc.add(eval.loss);
    }
    auto rec = acc.finish(epoch, start);
    if (snapshot) rec.snapshot = snapshot(model, epoch);
    result.history.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace ibkd::trainer
