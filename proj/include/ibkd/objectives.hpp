#pragma once

#include <map>
#include <string>

#include "ibkd/config.hpp"
#include "ibkd/kernels.hpp"
#include "ibkd/linalg.hpp"

namespace ibkd::objectives {

/// Loss to minimize plus its named components.
struct LossValue {
  double total = 0.0;
  std::map<std::string, double> parts;
};

/// Learnable d_s×d_t matrix aligning student and teacher dimensions.
struct AlignmentHead {
  Matrix w;
  void check(std::size_t student_dim, std::size_t teacher_dim) const;
  bool operator==(const AlignmentHead&) const = default;
};

// -- HSIC --------------------------------------------------------------------

/// Biased empirical HSIC, (1/l²)·tr(Kx·H·Ks·H).
double hsic(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx, const kernels::KernelSpec& ks);

struct HsicEval {
  double value = 0.0;
  Matrix grad_s;
};

HsicEval hsic_with_grad(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx,
                        const kernels::KernelSpec& ks);
Matrix hsic_grad_s(const Matrix& x_rows, const Matrix& s_rows, const kernels::KernelSpec& kx,
                   const kernels::KernelSpec& ks);

// -- InfoNCE -------------------------------------------------------------------

/// −(1/n) Σ_i log softmax_i(u_i·/τ)_ii for a square logit matrix, evaluated
/// with per-row max subtraction.
double infonce_from_logits(const Matrix& u, double tau);

/// In-batch InfoNCE between student rows s and teacher rows t with logits
/// u_ij = s_iᵀ W t_j. Every other item of the batch is a negative.
double infonce_distill(const Matrix& s, const Matrix& t, const AlignmentHead& head, double tau);

struct InfoNceDistillEval {
  double value = 0.0;
  Matrix grad_s;
  Matrix grad_w;
};

InfoNceDistillEval infonce_distill_grads(const Matrix& s, const Matrix& t, const AlignmentHead& head, double tau);

/// Supervised InfoNCE. `negatives` holds l·K rows; row i·K + k is the k-th
/// negative of anchor i. The denominator of anchor i runs over all in-batch
/// positives and its own K negatives.
double infonce_supervised(const Matrix& anchors, const Matrix& positives, const Matrix& negatives, std::size_t K,
                          double tau);

struct InfoNceSupervisedEval {
  double value = 0.0;
  Matrix grad_anchors;
  Matrix grad_positives;
  Matrix grad_negatives;
};

InfoNceSupervisedEval infonce_supervised_grads(const Matrix& anchors, const Matrix& positives,
                                               const Matrix& negatives, std::size_t K, double tau);

// -- Stage losses --------------------------------------------------------------

/// infonce_distill(s, t) + β₁·hsic(x, s).
LossValue loss_distill_stage(const Matrix& s, const Matrix& t, const Matrix& x, const AlignmentHead& head,
                             const DistillConfig& cfg);

struct DistillStageEval {
  LossValue loss;
  Matrix grad_s;
  Matrix grad_w;
};

DistillStageEval loss_distill_stage_grads(const Matrix& s, const Matrix& t, const Matrix& x,
                                          const AlignmentHead& head, const DistillConfig& cfg);

/// infonce_supervised(anchors, positives, negatives) + β₂·hsic(x, anchors).
LossValue loss_finetune_stage(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                              std::size_t K, const Matrix& x, const DistillConfig& cfg);

struct FinetuneStageEval {
  LossValue loss;
  Matrix grad_anchors;
  Matrix grad_positives;
  Matrix grad_negatives;
};

FinetuneStageEval loss_finetune_stage_grads(const Matrix& anchors, const Matrix& positives, const Matrix& negatives,
                                            std::size_t K, const Matrix& x, const DistillConfig& cfg);

}  // namespace ibkd::objectives
