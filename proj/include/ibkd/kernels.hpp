#pragma once

#include <string>

#include "ibkd/linalg.hpp"

namespace ibkd::kernels {

enum class KernelKind { Linear, RBF, IMQ };

/// Kernel choice for Gram construction. gamma is read only for RBF, c only
/// for IMQ.
struct KernelSpec {
  KernelKind kind = KernelKind::RBF;
  double gamma = 0.5;
  double c = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 0.0, 0.0}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::RBF, gamma, 0.0}; }
  static KernelSpec imq(double c = 1.0) { return {KernelKind::IMQ, 0.0, c}; }

  /// Throws a config error when gamma (RBF) or c (IMQ) is not positive.
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

std::string to_string(KernelKind kind);
KernelKind kind_from_string(const std::string& name);

/// Kernel value for a pair given their squared distance and inner product.
double evaluate(const KernelSpec& spec, double sq_dist, double inner);

/// dk/d(‖x−y‖²) expressed through the kernel value itself. Only meaningful
/// for the distance-based kernels (RBF, IMQ).
double dk_dsqdist(const KernelSpec& spec, double k_value);

/// n×n Gram matrix over the rows of `rows`:
///   Linear  K_ij = ⟨x_i, x_j⟩
///   RBF     K_ij = exp(−γ‖x_i − x_j‖²)
///   IMQ     K_ij = (‖x_i − x_j‖² + c²)^(−1/2)
/// Parallel over rows; only the upper triangle is computed and mirrored, so
/// the output is exactly symmetric.
Matrix gram(const KernelSpec& spec, const Matrix& rows);

/// H·K·H with H = I − (1/n)𝟙𝟙ᵀ, computed by subtracting row and column means
/// and adding back the grand mean.
Matrix center(const Matrix& k);

}  // namespace ibkd::kernels
