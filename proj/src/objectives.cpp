#include "ibkd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ibkd/error.hpp"

namespace ibkd::objectives {

void AlignmentHead::check(std::size_t student_dim, std::size_t teacher_dim) const {
  if (w.rows() != student_dim || w.cols() != teacher_dim) {
    fail(ErrorKind::Shape, "alignment head is " + w.shape_str() + ", expected " + std::to_string(student_dim) + "x" +
                               std::to_string(teacher_dim));
  }
}

namespace {

void check_pairing(const Matrix& x, const Matrix& s, const char* op) {
  if (x.rows() != s.rows()) {
    fail(ErrorKind::Pairing, std::string(op) + ": sample counts differ (" + std::to_string(x.rows()) + " vs " +
                                 std::to_string(s.rows()) + ")");
  }
  if (x.rows() < 2) fail(ErrorKind::Degenerate, std::string(op) + ": need at least 2 paired samples");
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::Config, "temperature must be positive");
}

// Σ_ij a_ij b_ij with a fixed summation order.
double frobenius_inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Softmax of one logit row, in place; returns log-sum-exp.
double softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return m + std::log(sum);
}

}  // namespace

double hsic(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx, const kernels::KernelSpec& ks) {
  check_pairing(x_rows, s_rows, "hsic");
  const Matrix kxc = kernels::center(kernels::gram(kx, x_rows));
  const Matrix ksm = kernels::gram(ks, s_rows);
  const double l = static_cast<double>(x_rows.rows());
  // tr(Kx H Ks H) = tr(H Kx H · Ks) = Σ_ij (H Kx H)_ij (Ks)_ij for symmetric Ks.
  return frobenius_inner(kxc, ksm) / (l * l);
}

HsicEval hsic_with_grad(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx,
                        const kernels::KernelSpec& ks) {
  check_pairing(x_rows, s_rows, "hsic");
  const std::size_t l = x_rows.rows();
  const double l2 = static_cast<double>(l * l);
  const Matrix kxc = kernels::center(kernels::gram(kx, x_rows));
  const Matrix ksm = kernels::gram(ks, s_rows);

  HsicEval out;
  out.value = frobenius_inner(kxc, ksm) / l2;
  out.grad_s = Matrix(l, s_rows.cols());

  if (ks.kind == kernels::KernelKind::Linear) {
    // ∂/∂S Σ G_ij s_iᵀs_j = 2·G·S for symmetric G = centered Kx / l².
    out.grad_s = linalg::scale(linalg::matmul(kxc, s_rows), 2.0 / l2);
    return out;
  }

  // Distance kernels: ∂K_aj/∂s_a = k'(r²)·2(s_a − s_j), each pair counted from
  // both sides of the symmetric sum.
  const std::size_t d = s_rows.cols();
#pragma omp parallel for schedule(static)
  for (std::size_t a = 0; a < l; ++a) {
    auto g = out.grad_s.row(a);
    for (std::size_t j = 0; j < l; ++j) {
      if (j == a) continue;
      const double coef = 4.0 * kxc(a, j) * kernels::dk_dsqdist(ks, ksm(a, j)) / l2;
      for (std::size_t c = 0; c < d; ++c) g[c] += coef * (s_rows(a, c) - s_rows(j, c));
    }
  }
  return out;
}

Matrix hsic_grad_s(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx,
                   const kernels::KernelSpec& ks) {
  return hsic_with_grad(x_rows, s_rows, kx, ks).grad_s;
}

namespace {

// Row-softmax cross-entropy with the diagonal as target. Fills `probs` with
// the softmax when non-null.
double infonce_core(const Matrix& u, double tau, Matrix* probs) {
  const std::size_t n = u.rows();
  std::vector<double> row_loss(n);
  Matrix p = linalg::scale(u, 1.0 / tau);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const double target = p(i, i);
    const double lse = softmax_inplace(p.row(i));
    row_loss[i] = lse - target;
  }
  double total = 0.0;
  for (double v : row_loss) total += v;
  if (probs) *probs = std::move(p);
  return total / static_cast<double>(n);
}

void check_distill_inputs(const Matrix& s, const Matrix& t, const AlignmentHead& head, double tau) {
  check_tau(tau);
  if (s.rows() != t.rows()) fail(ErrorKind::Pairing, "infonce_distill: student and teacher batch sizes differ");
  if (s.rows() < 2) fail(ErrorKind::Degenerate, "infonce_distill: batch needs at least 2 items");
  head.check(s.cols(), t.cols());
}

}  // namespace

double infonce_from_logits(const Matrix& u, double tau) {
  check_tau(tau);
  if (u.rows() != u.cols()) fail(ErrorKind::Shape, "infonce: logits must be square, got " + u.shape_str());
  if (u.rows() < 2) fail(ErrorKind::Degenerate, "infonce: batch needs at least 2 items");
  return infonce_core(u, tau, nullptr);
}

double infonce_distill(const Matrix& s, const Matrix& t, const AlignmentHead& head, double tau) {
  check_distill_inputs(s, t, head, tau);
  const Matrix u = linalg::matmul_nt(linalg::matmul(s, head.w), t);
  return infonce_core(u, tau, nullptr);
}

InfoNceDistillEval infonce_distill_grads(const Matrix& s, const Matrix& t, const AlignmentHead& head, double tau) {
  check_distill_inputs(s, t, head, tau);
  const std::size_t n = s.rows();
  const Matrix u = linalg::matmul_nt(linalg::matmul(s, head.w), t);
  Matrix d;
  InfoNceDistillEval out;
  out.value = infonce_core(u, tau, &d);
  // ∂L/∂u = (P − I) / (nτ)
  const double inv = 1.0 / (static_cast<double>(n) * tau);
  for (std::size_t i = 0; i < n; ++i) d(i, i) -= 1.0;
  for (double& v : d.data()) v *= inv;
  const Matrix dt = linalg::matmul(d, t);      // n×d_t
  out.grad_s = linalg::matmul_nt(dt, head.w);  // D·T·Wᵀ
  out.grad_w = linalg::matmul_tn(s, dt);       // Sᵀ·D·T
  return out;
}

namespace {

void check_supervised(const Matrix& a, const Matrix& p, const Matrix& neg, std::size_t K, double tau) {
  check_tau(tau);
  if (a.rows() != p.rows() || a.cols() != p.cols()) {
    fail(ErrorKind::Pairing, "infonce_supervised: anchors " + a.shape_str() + " vs positives " + p.shape_str());
  }
  if (a.rows() == 0) fail(ErrorKind::Degenerate, "infonce_supervised: empty batch");
  if (neg.rows() != a.rows() * K || (K > 0 && neg.cols() != a.cols())) {
    fail(ErrorKind::Pairing, "infonce_supervised: expected " + std::to_string(a.rows() * K) + "x" +
                                 std::to_string(a.cols()) + " negatives, got " + neg.shape_str());
  }
}

}  // namespace

double infonce_supervised(const Matrix& anchors, const Matrix& positives, const Matrix& negatives, std::size_t K,
                          double tau) {
  return infonce_supervised_grads(anchors, positives, negatives, K, tau).value;
}

InfoNceSupervisedEval infonce_supervised_grads(const Matrix& anchors, const Matrix& positives,
                                               const Matrix& negatives, std::size_t K, double tau) {
  check_supervised(anchors, positives, negatives, K, tau);
  const std::size_t l = anchors.rows(), d = anchors.cols();
  const double inv_l = 1.0 / static_cast<double>(l);

  Matrix d_pos(l, l);  // ∂L/∂(a_iᵀp_j)
  Matrix d_neg(l, K);  // ∂L/∂(a_iᵀn_ik)
  std::vector<double> row_loss(l);
  InfoNceSupervisedEval out;
  out.grad_anchors = Matrix(l, d);
  out.grad_negatives = Matrix(l * K, d);

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<double> z(l + K);
    for (std::size_t j = 0; j < l; ++j) z[j] = linalg::dot(anchors.row(i), positives.row(j)) / tau;
    for (std::size_t k = 0; k < K; ++k) z[l + k] = linalg::dot(anchors.row(i), negatives.row(i * K + k)) / tau;
    const double target = z[i];
    row_loss[i] = softmax_inplace(z) - target;
    z[i] -= 1.0;
    for (std::size_t j = 0; j < l; ++j) d_pos(i, j) = z[j] * inv_l / tau;
    for (std::size_t k = 0; k < K; ++k) d_neg(i, k) = z[l + k] * inv_l / tau;

    auto ga = out.grad_anchors.row(i);
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t c = 0; c < d; ++c) ga[c] += d_pos(i, j) * positives(j, c);
    for (std::size_t k = 0; k < K; ++k) {
      auto gn = out.grad_negatives.row(i * K + k);
      for (std::size_t c = 0; c < d; ++c) {
        ga[c] += d_neg(i, k) * negatives(i * K + k, c);
        gn[c] = d_neg(i, k) * anchors(i, c);
      }
    }
  }
  double total = 0.0;
  for (double v : row_loss) total += v;
  out.value = total * inv_l;
  out.grad_positives = linalg::matmul_tn(d_pos, anchors);
  return out;
}

LossValue loss_distill_stage(const Matrix& s, const Matrix& t, const Matrix& x, const AlignmentHead& head,
                             const DistillConfig& cfg) {
  LossValue lv;
  const double nce = infonce_distill(s, t, head, cfg.tau_distill);
  const double h = hsic(x, s, cfg.kernel, cfg.kernel);
  lv.parts["infonce"] = nce;
  lv.parts["hsic"] = h;
  lv.total = nce + cfg.beta1 * h;
  return lv;
}

DistillStageEval loss_distill_stage_grads(const Matrix& s, const Matrix& t, const Matrix& x,
                                          const AlignmentHead& head, const DistillConfig& cfg) {
  DistillStageEval out;
  auto nce = infonce_distill_grads(s, t, head, cfg.tau_distill);
  auto h = hsic_with_grad(x, s, cfg.kernel, cfg.kernel);
  out.loss.parts["infonce"] = nce.value;
  out.loss.parts["hsic"] = h.value;
  out.loss.total = nce.value + cfg.beta1 * h.value;
  out.grad_s = std::move(nce.grad_s);
  if (cfg.beta1 != 0.0) linalg::axpy(out.grad_s, cfg.beta1, h.grad_s);
  out.grad_w = std::move(nce.grad_w);
  return out;
}

LossValue loss_finetune_stage(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                              std::size_t K, const Matrix& x, const DistillConfig& cfg) {
  LossValue lv;
  const double nce = infonce_supervised(anchors, positives, negatives, K, cfg.tau_finetune);
  const double h = anchors.rows() >= 2 ? hsic(x, anchors, cfg.kernel, cfg.kernel) : 0.0;
  lv.parts["infonce"] = nce;
  lv.parts["hsic"] = h;
  lv.total = nce + cfg.beta2 * h;
  return lv;
}

FinetuneStageEval loss_finetune_stage_grads(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                                            std::size_t K, const Matrix& x, const DistillConfig& cfg) {
  FinetuneStageEval out;
  auto nce = infonce_supervised_grads(anchors, positives, negatives, K, cfg.tau_finetune);
  out.loss.parts["infonce"] = nce.value;
  out.grad_anchors = std::move(nce.grad_anchors);
  double h = 0.0;
  if (anchors.rows() >= 2) {
    auto he = hsic_with_grad(x, anchors, cfg.kernel, cfg.kernel);
    h = he.value;
    if (cfg.beta2 != 0.0) linalg::axpy(out.grad_anchors, cfg.beta2, he.grad_s);
  }
  out.loss.parts["hsic"] = h;
  out.loss.total = nce.value + cfg.beta2 * h;
  out.grad_positives = std::move(nce.grad_positives);
  out.grad_negatives = std::move(nce.grad_negatives);
  return out;
}

}  // namespace ibkd::objectives
